"""sageforge: two-stage code representation pretraining at desk scale.

Pipeline: corpus preparation (function extraction, bimodal filtering, hard
positives) -> syntax statistics -> identifier obfuscation -> BPE tokenizer ->
Stage I denoising (masked prediction + deobfuscation) -> Stage II bimodal
contrastive learning with hard negatives -> zero-shot semantic-search
evaluation (MAP / MRR).
"""

__version__ = "0.1.0"
