"""Pinned default constants shared across the pipeline.

These values are load-bearing: config tests assert them, so changing one is
an interface change, not a tweak.
"""

# Weight on the phrase embedding in the mixed retrieval query
# q = alpha * phrase + (1 - alpha) * visual.
ALPHA = 0.5

# QA augmentation fan-out: one generated QA pair per retrieved knowledge
# statement, up to this many statements per sentence.
AUGMENT_K = 5

# Number of knowledge statements retrieved per query at inference time.
RETRIEVE_TOP_K = 20

# PPO clipping range for the probability ratio.
PPO_CLIP_EPSILON = 0.2

# Softmax temperature for the contrastive losses.
TEMPERATURE = 0.07

# Positives retrieved per pair during contrastive training.
K_POS = 5

# Contrastive training defaults (desk scale).
BATCH_SIZE = 32
EMBED_DIM = 32
BASE_DIM = 32
TRAIN_STEPS = 500
LEARNING_RATE = 0.1

# Loss term weights (v2t, t2v, v2k, t2k).
LOSS_WEIGHTS = (1.0, 1.0, 1.0, 1.0)

# Reward baseline: exponential moving average decay.
BASELINE_DECAY = 0.9

# Scene edit argument grid resolution, meters.
EDIT_GRID = 0.1
