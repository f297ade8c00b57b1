"""
Utils - Utilities e Funzioni di Supporto

Questo modulo contiene il logger di sessione e le funzioni di scrittura
e lettura dei report (CSV e JSON atomici, resume delle suite).

Componenti:
- LabLogger: log di sessione su file
- Scrittura atomica dei report
- Funzioni di resume e controllo
"""

from .lab_logger import LabLogger, create_logger_for_experiment
from .utils import (
    create_output_filename,
    write_csv_atomic,
    write_json_atomic,
    read_csv_rows,
    check_already_written,
    find_written_reports,
    get_resume_info
)

__all__ = [
    'LabLogger',
    'create_logger_for_experiment',
    'create_output_filename',
    'write_csv_atomic',
    'write_json_atomic',
    'read_csv_rows',
    'check_already_written',
    'find_written_reports',
    'get_resume_info'
]
