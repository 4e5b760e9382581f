import shutil
from pathlib import Path

from src.common.common import load_settings

from .CommandExecutor import CommandExecutor
from .FileManager import FileManager
from .Logger import Logger
from .ParameterManager import ParameterManager


class WorkflowManager:
    # Core workflow logic using the above classes
    def __init__(self, name: str, workspace: str | Path, echo: bool = False):
        self.name = name
        self.workflow_dir = Path(workspace, name.replace(" ", "-").lower())
        self.file_manager = FileManager(self.workflow_dir)
        self.logger = Logger(self.workflow_dir, echo=echo)
        self.parameter_manager = ParameterManager(self.workflow_dir)
        self.executor = CommandExecutor(self.workflow_dir, self.logger)
        self.params = self.parameter_manager.get_parameters_from_json()

    def configure(self, config_file: str | Path | None = None, overrides: dict | None = None) -> dict:
        """
        Loads and checks the parameters of this run and saves them to the workflow directory.
        """
        self.params = self.parameter_manager.load_parameters(config_file, overrides)
        self.parameter_manager.save_parameters(self.params)
        return self.params

    def start_workflow(self) -> None:
        """
        Starts the workflow. Old logs are removed so that the log files describe
        this run only.
        """
        shutil.rmtree(Path(self.workflow_dir, "logs"), ignore_errors=True)
        self.workflow_process()

    def workflow_process(self) -> None:
        """
        Workflow process. Logs start and end of the workflow and calls the execution
        method where all steps are defined, then the results method. Errors are
        logged and passed on to the caller.
        """
        try:
            self.logger.log(f"STARTING WORKFLOW: {load_settings()['app-name']} {self.name}")
            results_dir = Path(self.workflow_dir, "results")
            if results_dir.exists():
                shutil.rmtree(results_dir)
            results_dir.mkdir(parents=True)
            self.execution()
            self.results()
            self.logger.log("WORKFLOW FINISHED")
        except Exception as e:
            self.logger.log(f"ERROR: {e}")
            raise

    def execution(self) -> None:
        """
        Add your workflow steps here
        """
        pass

    def results(self) -> None:
        """
        Summarize results here
        """
        pass
