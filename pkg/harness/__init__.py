from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig
from .evaluation import evaluate
from .experiment import run_experiment
from .report import RunReport, compare_reports, load_report
from .training import RunState, pretrain_critic, pretrain_ml, run_schedule, train_actor_critic
