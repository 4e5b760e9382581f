from pathlib import Path
from typing import List, Union


class FileManager:
    """
    Manages file paths inside a workflow directory: changing file extensions,
    moving files into results subdirectories and collecting files of one kind.

    Methods:
        get_files: Returns a list of file paths as strings for the specified files, optionally with new file type and results subdirectory.
        find_files: Lists the files with a given extension in a directory.
    """

    def __init__(self, workflow_dir: Path):
        """
        Initializes the FileManager object with the current workflow directory.
        """
        self.workflow_dir = Path(workflow_dir)

    @property
    def results_dir(self) -> Path:
        return Path(self.workflow_dir, "results")

    def get_files(
        self,
        files: Union[List[Union[str, Path]], Path, str],
        set_file_type: str = None,
        set_results_dir: str = None,
    ) -> List[str]:
        """
        Returns a list of file paths as strings for the specified files.
        Optionally sets or changes the file extension for all files to the
        specified file type and changes the directory to a subdirectory of the
        workflow results directory.

        Args:
            files (Union[List[Union[str, Path]], Path, str]): File names or paths.
                A directory Path stands for the files it contains.
            set_file_type (str): The file extension to set for all files.
            set_results_dir (str): The name of a subdirectory in the workflow
                results directory, "" for the results directory itself.

        Returns:
            List[str]: The (modified) files list.
        """
        if isinstance(files, str):
            files = [files]
        elif isinstance(files, Path):
            if files.is_dir():
                files = [str(f) for f in sorted(files.iterdir())]
            else:
                files = [str(files)]
        elif isinstance(files, list):
            files = [str(f) for f in files if isinstance(f, (str, Path))]
        if not files:
            raise ValueError(
                f"No files found, can not set file type **{set_file_type}** and results_dir **{set_results_dir}**."
            )
        if set_file_type is not None:
            files = [str(Path(f).with_suffix("." + set_file_type)) for f in files]
        if set_results_dir is not None:
            subdir = self._create_results_sub_dir(set_results_dir)
            files = [str(Path(subdir, Path(f).name)) for f in files]
        return files

    def find_files(self, directory: Union[str, Path], file_type: str) -> List[str]:
        """
        Lists the files with the given extension in a directory, sorted by name.

        Raises:
            ValueError: If the directory does not exist or holds no such files.
        """
        directory = Path(directory)
        if not directory.is_dir():
            raise ValueError(f"Directory **{directory}** does not exist.")
        return self.get_files(sorted(directory.glob(f"*.{file_type}")))

    def _create_results_sub_dir(self, name: str = "") -> str:
        """
        Creates a subdirectory within the results directory for storing files,
        or the results directory itself if the name is empty.

        Args:
            name (str, optional): The name of the subdirectory.

        Returns:
            str: The path to the created directory as a string.
        """
        path = Path(self.results_dir, name)
        path.mkdir(parents=True, exist_ok=True)
        return str(path)
