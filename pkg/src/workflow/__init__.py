from .CommandExecutor import CommandExecutor
from .FileManager import FileManager
from .Logger import Logger
from .ParameterManager import ATTACK_SCHEMA, RUN_SCHEMA, ParameterManager, check_parameters
from .WorkflowManager import WorkflowManager
