"""
Lab Logger - Log di sessione del laboratorio

Un file session_*.log per esecuzione nella cartella logs/ dell'esperimento. L'handler
del file viene agganciato anche ai logger dei pacchetti core/cli/utils, così i messaggi
dei kernel numerici finiscono nella stessa sessione.
"""

import logging
import os
import platform
import sys
import threading
from datetime import datetime
from functools import partialmethod
from importlib import metadata
from pathlib import Path
from typing import Dict, Iterable, Optional

PACKAGE_LOGGERS = ("core", "cli", "utils", "node_gluing_lab")
KEPT_SESSION_LOGS = 3
LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'
BANNER_PACKAGES = ("numpy", "scipy", "networkx", "matplotlib")


def prune_session_logs(log_dir: Path, keep: int, current: Optional[Path] = None):
    """Delete all but the `keep` most recent session logs of log_dir (current included)"""
    others = [p for p in log_dir.glob("session_*.log")
              if current is None or p.resolve() != current.resolve()]
    others.sort(key=lambda p: p.stat().st_mtime, reverse=True)
    budget = keep - 1 if current is not None else keep
    for stale in others[max(budget, 0):]:
        try:
            stale.unlink()
        except OSError:
            pass


def environment_summary(packages: Iterable[str] = BANNER_PACKAGES) -> Dict[str, str]:
    summary = {
        "avvio": datetime.now().isoformat(timespec="seconds"),
        "python": sys.version.split()[0],
        "piattaforma": platform.platform(),
        "cartella": os.getcwd(),
    }
    for name in packages:
        try:
            summary[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            summary[name] = "assente"
    return summary


def _format_details(details: Optional[dict]) -> str:
    if not details:
        return ""
    return " [" + ", ".join(f"{k}={v}" for k, v in details.items()) + "]"


class LabLogger:
    """Logger di sessione: file dedicato più i logger dei moduli del laboratorio"""

    def __init__(self, log_file_path: Optional[str] = None, level: int = logging.DEBUG):
        """
        Args:
            log_file_path: file della sessione (None: nessun file, i messaggi vanno persi)
            level: livello minimo scritto nel file
        """
        self.log_file_path = log_file_path
        self.level = level
        self.lock = threading.Lock()
        self.file_handler: Optional[logging.FileHandler] = None

        self.logger = logging.getLogger(f"{__name__}.session")
        self.logger.setLevel(logging.DEBUG)
        self.logger.propagate = False
        for handler in list(self.logger.handlers):
            self.logger.removeHandler(handler)

        if log_file_path:
            self._attach_file(Path(log_file_path))
        self._write_banner()

    def _attach_file(self, path: Path):
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            handler = logging.FileHandler(path, encoding='utf-8')
        except OSError as e:
            print(f"Log di sessione non disponibile ({path}): {e}", file=sys.stderr)
            return

        handler.setLevel(self.level)
        handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT))
        self.file_handler = handler
        self.logger.addHandler(handler)
        for name in PACKAGE_LOGGERS:
            package_logger = logging.getLogger(name)
            if package_logger.level == logging.NOTSET or package_logger.level > self.level:
                package_logger.setLevel(self.level)
            package_logger.addHandler(handler)

        prune_session_logs(path.parent, KEPT_SESSION_LOGS, current=path)

    def _write_banner(self):
        self.info("Sessione Node Gluing Lab")
        for key, value in environment_summary().items():
            self.info(f"  {key}: {value}")

    def log(self, level: int, message: str, exc_info=None):
        with self.lock:
            self.logger.log(level, message, exc_info=exc_info)

    debug = partialmethod(log, logging.DEBUG)
    info = partialmethod(log, logging.INFO)
    warning = partialmethod(log, logging.WARNING)
    error = partialmethod(log, logging.ERROR)
    critical = partialmethod(log, logging.CRITICAL)

    def exception(self, message: str, exc_info=True):
        """ERROR con traceback (quello corrente, o la tupla passata)"""
        self.log(logging.ERROR, message, exc_info=exc_info)

    def log_operation_start(self, operation: str, details: dict = None):
        self.info(f"AVVIO {operation}{_format_details(details)}")

    def log_operation_end(self, operation: str, success: bool, details: dict = None):
        outcome = "SUCCESSO" if success else "FALLIMENTO"
        self.info(f"ESITO {operation}: {outcome}{_format_details(details)}")

    def close(self):
        """Stacca il file dai logger del pacchetto e lo chiude"""
        with self.lock:
            handler, self.file_handler = self.file_handler, None
            if handler is None:
                return
            for name in PACKAGE_LOGGERS:
                logging.getLogger(name).removeHandler(handler)
            self.logger.removeHandler(handler)
            handler.close()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if exc_type is not None:
            self.exception(f"Eccezione non gestita: {exc_type.__name__}: {exc_val}",
                           exc_info=(exc_type, exc_val, exc_tb))
        self.close()


def create_logger_for_experiment(experiment_manager) -> Optional[LabLogger]:
    """LabLogger sul file di log dell'esperimento attivo, None se non ce n'è uno"""
    log_file_path = experiment_manager.get_current_log_file_path()
    return LabLogger(log_file_path) if log_file_path else None
