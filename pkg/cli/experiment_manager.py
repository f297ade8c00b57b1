#!/usr/bin/env python3
"""
Experiment Manager - Gestione della cartella di output di una sessione

Crea reports/, plots/ e logs/ nella cartella di output, registra i file
scritti e salva i metadati della sessione in run_metadata.json.
"""

import json
import logging
import os
import shutil
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional

logger = logging.getLogger(__name__)

SUBDIRECTORIES = ("reports", "plots", "logs")


class ExperimentManager:
    """Gestisce la cartella di output di una sessione del laboratorio"""

    def __init__(self, output_dir: str):
        """
        Inizializza il gestore

        Args:
            output_dir: Cartella di output della sessione
        """
        self.output_dir = Path(output_dir)
        self.current_experiment: Optional[str] = None
        self.metadata: Dict = {}

    def start(self, config_snapshot: Dict, suites: List[str], version: str) -> str:
        """
        Crea le cartelle e scrive i metadati iniziali

        Returns:
            Path della cartella di output
        """
        existed = self.output_dir.exists()
        self.output_dir.mkdir(parents=True, exist_ok=True)
        for name in SUBDIRECTORIES:
            (self.output_dir / name).mkdir(exist_ok=True)

        self.metadata = {
            "started_at": datetime.now().isoformat(),
            "version": version,
            "config": config_snapshot,
            "suites": list(suites),
            "files_written": [],
            "preexisting_output": existed,
        }
        self.current_experiment = str(self.output_dir)
        self._save_metadata()
        return self.current_experiment

    def add_written_file(self, path: str, kind: str):
        """Registra un file scritto (report, plot, json)"""
        if not self.current_experiment:
            return
        self.metadata["files_written"].append({
            "path": os.path.relpath(path, self.current_experiment),
            "type": kind,
        })
        self._save_metadata()

    def finish(self, exit_status: int, summary: Optional[Dict] = None):
        if not self.current_experiment:
            return
        self.metadata["finished_at"] = datetime.now().isoformat()
        self.metadata["exit_status"] = exit_status
        if summary:
            self.metadata["summary"] = summary
        self._save_metadata()

    def _save_metadata(self):
        metadata_file = Path(self.current_experiment) / "run_metadata.json"
        with open(metadata_file, 'w', encoding='utf-8') as f:
            json.dump(self.metadata, f, indent=2, ensure_ascii=False, default=str)

    def get_paths(self) -> Dict[str, str]:
        """Restituisce i path delle cartelle della sessione"""
        return {
            "output": str(self.output_dir),
            "reports": str(self.output_dir / "reports"),
            "plots": str(self.output_dir / "plots"),
            "logs": str(self.output_dir / "logs"),
        }

    def get_current_log_file_path(self) -> Optional[str]:
        """Percorso del file di log per la sessione corrente"""
        if not self.current_experiment:
            return None
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        return str(Path(self.current_experiment) / "logs" / f"session_{timestamp}.log")

    def has_saved_content(self) -> bool:
        """Verifica se la sessione ha scritto almeno un report o un grafico"""
        if not self.current_experiment:
            return False
        for folder in ("reports", "plots"):
            folder_path = self.output_dir / folder
            if folder_path.exists() and any(folder_path.iterdir()):
                return True
        return False

    def cleanup_empty_run(self):
        """Rimuove la cartella di output se non contiene report"""
        if not self.current_experiment:
            return
        if not self.has_saved_content() and not self.metadata.get("preexisting_output"):
            try:
                shutil.rmtree(self.current_experiment)
                logger.info(f"Cartella di output vuota rimossa: {self.current_experiment}")
            except OSError as e:
                logger.warning(f"Errore rimozione cartella di output: {e}")
        self.current_experiment = None
        self.metadata = {}
