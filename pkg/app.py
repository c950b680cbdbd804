"""
Punto de entrada de la línea de comandos.
Este archivo importa y expone el grupo de comandos del módulo src.
"""

# Importar la línea de comandos desde el módulo src
from src.app import cli

if __name__ == "__main__":
    cli()
