"""Command-line interface and scene archive format."""
from .archive import ArchiveError, ChecksumError, fnv1a64, read_archive, read_manifest, write_archive
from .main import EXIT_FAIL, EXIT_INPUT, EXIT_PASS, build_parser, main

__all__ = [
    "ArchiveError",
    "ChecksumError",
    "EXIT_FAIL",
    "EXIT_INPUT",
    "EXIT_PASS",
    "build_parser",
    "fnv1a64",
    "main",
    "read_archive",
    "read_manifest",
    "write_archive",
]
