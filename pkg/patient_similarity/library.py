"""
Run Library

File-based ledger of completed CLI runs: which command ran, with which
parameters, and which files it wrote. One JSON document per run.
"""

from datetime import datetime
from typing import Any, Dict, List, Optional
import json
import logging
import os
import uuid

logger = logging.getLogger(__name__)


class RunLibrary:
    """
    Manages persistent storage of run records.

    Usage:
        library = RunLibrary('outputs/library')
        entry = library.save_run('dist', {'metric': 'ted'}, ['outputs/distances_ted.csv'])
        library.get_run(entry['id'])
    """

    def __init__(self, library_folder: str):
        """
        Args:
            library_folder (str): Path to library storage folder
        """
        self.library_folder = library_folder
        os.makedirs(library_folder, exist_ok=True)

    def _path(self, run_id: str) -> str:
        return os.path.join(self.library_folder, f'{run_id}.json')

    def save_run(self, command: str, parameters: Dict[str, Any], outputs: List[str]) -> Dict[str, str]:
        """
        Record a run.

        Args:
            command (str): Subcommand name
            parameters (dict): Parameters the run used (JSON-serialisable)
            outputs (list): Paths of the files written

        Returns:
            dict: {id, command, created_at}
        """
        run_id = str(uuid.uuid4())[:8]

        run_data = {
            'id': run_id,
            'command': command,
            'created_at': datetime.now().isoformat(),
            'parameters': parameters,
            'outputs': list(outputs),
        }

        with open(self._path(run_id), 'w', encoding='utf-8') as f:
            json.dump(run_data, f, indent=2, ensure_ascii=False, default=str)

        logger.debug(f"Recorded {command} run {run_id}")
        return {
            'id': run_id,
            'command': command,
            'created_at': run_data['created_at'],
        }

    def list_runs(self) -> List[Dict[str, Any]]:
        """
        List all recorded runs, newest first.

        Returns:
            list: Run summaries {id, command, created_at, output_count}
        """
        runs = []

        for filename in os.listdir(self.library_folder):
            if not filename.endswith('.json'):
                continue
            filepath = os.path.join(self.library_folder, filename)
            try:
                with open(filepath, 'r', encoding='utf-8') as f:
                    data = json.load(f)
            except (OSError, json.JSONDecodeError) as e:
                logger.warning(f"Skipping unreadable run record {filename}: {e}")
                continue
            runs.append({
                'id': data.get('id'),
                'command': data.get('command'),
                'created_at': data.get('created_at'),
                'output_count': len(data.get('outputs', [])),
            })

        runs.sort(key=lambda x: x.get('created_at') or '', reverse=True)
        return runs

    def get_run(self, run_id: str) -> Optional[Dict[str, Any]]:
        """
        Returns:
            dict: Full run record or None if not found
        """
        filepath = self._path(run_id)

        if not os.path.exists(filepath):
            return None

        with open(filepath, 'r', encoding='utf-8') as f:
            return json.load(f)

    def delete_run(self, run_id: str) -> bool:
        """
        Returns:
            bool: True if deleted, False if not found
        """
        filepath = self._path(run_id)

        if not os.path.exists(filepath):
            return False

        os.remove(filepath)
        return True
