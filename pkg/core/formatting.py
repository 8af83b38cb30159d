"""Shared console formatting utilities."""
from typing import Dict, Optional


def print_section_header(title: str, char: str = "=", width: int = 70) -> None:
    """Print a section header.

    Args:
        title: Title to print
        char: Character for the line (default: "=")
        width: Line width (default: 70)
    """
    print("\n" + char * width)
    print(title)
    print(char * width)


def format_metric(value: Optional[float], digits: int = 3) -> str:
    """Format a possibly-undefined number for console output."""
    if value is None:
        return "undefined"
    return f"{value:.{digits}f}"


def print_generation_summary(
    outcome: str,
    generated: int,
    failed: int,
    mean_facts: float,
    selected: Optional[int] = None,
) -> None:
    """Print a standardized profile generation summary."""
    print("\n" + "=" * 70)
    print("PROFILE GENERATION SUMMARY")
    print("=" * 70)
    print(f"Outcome: {outcome}")
    print(f"Generated: {generated}")
    print(f"Failed: {failed}")
    print(f"Mean facts per profile: {mean_facts:.1f}")
    if selected is not None:
        print(f"Selected by sigma bands: {selected}")
    print("=" * 70)


def print_run_summary(title: str, counts: Dict[str, int], outputs: Dict[str, str]) -> None:
    """Print counts and output paths at the end of a command."""
    print("\n" + "=" * 70)
    print(title)
    print("=" * 70)
    for label, count in counts.items():
        print(f"  {label}: {count}")
    if outputs:
        print("\nOutputs:")
        for label, path in outputs.items():
            print(f"  • {label}: {path}")
    print("=" * 70)
