#!/usr/bin/env python3
"""
Node Gluing Lab - Avvio da riga di comando

Laboratorio numerico per l'incollamento di metriche di Kähler-Einstein
sulle smussature di superfici di Del Pezzo nodali.

Uso:
    python3 run_lab.py run --config configs/default.ini
    python3 run_lab.py solve --delta 0.0625 --beta -1
    python3 run_lab.py node-bound --degree 3

Requisiti:
    - Python 3.8+
    - numpy, scipy, networkx
    - matplotlib
    - attrs, click, tqdm

Installazione dipendenze:
    pip install -r requirements.txt
"""

import os
import sys

# Versioni minime: scipy.stats.qmc, networkx.to_scipy_sparse_array, svg.hashsalt
MIN_VERSIONS = {
    "numpy": "1.22",
    "scipy": "1.8",
    "networkx": "2.8",
    "matplotlib": "3.5",
}


def check_dependencies():
    """Pacchetti mancanti e avvisi di versione per lo stack numerico"""
    missing_deps: list = []
    warnings = []

    for module, package in (("numpy", "numpy"), ("scipy", "scipy"), ("networkx", "networkx"),
                            ("matplotlib", "matplotlib"), ("attr", "attrs"),
                            ("click", "click"), ("tqdm", "tqdm")):
        try:
            __import__(module)
        except ImportError:
            missing_deps.append(package)

    # senza packaging si salta il confronto delle versioni
    try:
        from packaging import version
    except ImportError:
        warnings.append("packaging assente: versioni minime non verificate")
        return missing_deps, warnings

    for module, minimum in MIN_VERSIONS.items():
        if module in missing_deps:
            continue
        installed = getattr(sys.modules.get(module) or __import__(module), "__version__", None)
        if installed and version.parse(installed) < version.parse(minimum):
            warnings.append(f"{module} {installed} - richiesta versione >= {minimum}")

    return missing_deps, warnings


def main():
    """Avvia la riga di comando del laboratorio"""
    missing, warnings = check_dependencies()

    if missing:
        print("❌ Dipendenze mancanti:", file=sys.stderr)
        for dep in missing:
            print(f"   • {dep}", file=sys.stderr)
        print("\n🔧 Installa le dipendenze:", file=sys.stderr)
        print("   pip install -r requirements.txt", file=sys.stderr)
        sys.exit(1)

    if warnings:
        print("⚠️ Avvisi sulle dipendenze:", file=sys.stderr)
        for warning in warnings:
            print(f"   • {warning}", file=sys.stderr)

    # checkout non installato
    current_dir = os.path.dirname(os.path.abspath(__file__))
    if current_dir not in sys.path:
        sys.path.insert(0, current_dir)

    from cli.main import main as cli_main
    cli_main()


if __name__ == "__main__":
    main()
