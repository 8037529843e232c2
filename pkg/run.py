#!/usr/bin/env python3
"""
Launcher script for UnaryFlow
"""

import os
import sys


def main():
    """Main entry point"""
    # Add src directory to path
    src_dir = os.path.join(os.path.dirname(os.path.abspath(__file__)), "src")
    sys.path.insert(0, src_dir)

    from cli import UnaryFlowCLI
    cli = UnaryFlowCLI()
    return cli.run()


if __name__ == "__main__":
    sys.exit(main())
