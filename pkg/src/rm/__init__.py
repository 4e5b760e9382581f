from .labels import EMPTY, LabelString, proposition_key
from .rewardmachine import Edge, RewardMachine, load_rm, parse_rm, rm_step, serialize_rm, validate
from .crm import CounterfactualExperience, crm_batch
from .shaping import PotentialTable, ars_potentials, ars_sweep, shape_reward
