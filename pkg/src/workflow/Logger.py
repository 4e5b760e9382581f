from pathlib import Path


class Logger:
    """
    A simple leveled logging class writing messages to log files in the logs
    directory of a workflow, facilitating tracking of training progress, attack
    sessions and errors during workflow execution.

    Level 0 messages go to all three log files, level 1 to run-times.log and
    all.log, level 2 only to all.log.

    Attributes:
        workflow_dir (Path): The workflow directory containing the logs directory.
        echo (bool): Also print level 0 messages to stdout.
    """

    LOG_FILES = ("minimal.log", "run-times.log", "all.log")

    def __init__(self, workflow_dir: Path, echo: bool = False) -> None:
        self.workflow_dir = Path(workflow_dir)
        self.echo = echo

    @property
    def log_dir(self) -> Path:
        return Path(self.workflow_dir, "logs")

    def log(self, message: str, level: int = 0) -> None:
        """
        Appends a given message to the log files of its level and below, followed
        by a blank line for readability.

        Args:
            message (str): The message to be logged.
            level (int, optional): The level of detail of the message. Defaults to 0.
        """
        self.log_dir.mkdir(parents=True, exist_ok=True)
        for threshold, name in enumerate(self.LOG_FILES):
            if level <= threshold:
                with open(Path(self.log_dir, name), "a", encoding="utf-8") as f:
                    f.write(f"{message}\n\n")
        if self.echo and level == 0:
            print(message)

    def read(self, name: str = "minimal.log") -> str:
        """Content of one log file, empty if nothing was logged yet."""
        path = Path(self.log_dir, name)
        return path.read_text(encoding="utf-8") if path.exists() else ""
