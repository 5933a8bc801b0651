"""Promptable-segmentation adapter.

Fine-tunes a point-promptable segmentation network with its mask decoder
frozen (only the image and prompt encoders adapt) and exports scored mask
candidates in the contour-extraction pipeline's on-disk interchange
format. The pipeline and this package communicate through files only.
"""

from .data import Pair, load_pairs, sample_interior_point
from .export import AdapterConfig, ExportResult, export_candidates
from .losses import LossWeights, composite_loss, soft_dice_loss, soft_iou, training_loss
from .model import PromptSegNet, load_checkpoint, module_checksum, save_checkpoint
from .train import FinetuneConfig, FinetuneResult, finetune, pretrain

__version__ = "0.1.0"
