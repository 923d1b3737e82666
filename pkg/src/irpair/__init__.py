"""Unpaired-to-paired data synthesis toolkit.

Given a corpus of source-only texts (dialogues, documents, paragraphs) and a
disjoint corpus of target-only texts (summaries, questions), the pipeline has
a teacher model compress each text into a short structured intermediate
representation (IR), trains a student to invert IR -> source, and pairs each
authentic target with a student-generated source. Includes best-of-n
filtering, ROUGE/rubric evaluation, and teacher-cost accounting.
"""

__version__ = "0.1.0"
