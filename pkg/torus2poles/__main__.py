#!/usr/bin/env python3
"""数值实验室入口"""
from torus2poles.cli import app

if __name__ == "__main__":
    app()
