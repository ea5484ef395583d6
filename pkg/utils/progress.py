"""Progress bar over the verification sweep."""

import sys
from typing import Optional

from tqdm import tqdm

BAR_FORMAT = "{desc}|{percentage:3.0f}%|{bar}|{n_fmt}/{total_fmt}|{elapsed}->{remaining}"


class ProgressBarManager:
    """Manages progress bar state and updates for a run of checks.

    Keeps the tqdm instance out of the runner's signatures; every method
    is a no-op when the bar is disabled.
    """

    def __init__(self, total_checks: int, description: str, enabled: bool):
        """Initialize progress bar manager.

        Args:
            total_checks: Number of (stage, check) jobs in the run
            description: Description text for the progress bar
            enabled: If True, create progress bar; otherwise no-op
        """
        self.total_checks = total_checks
        self.pbar: Optional[tqdm] = None  # type: ignore[type-arg]
        self.base_desc = description
        self.failures = 0

        if enabled:
            self.pbar = tqdm(
                total=total_checks,
                desc=description,
                unit="check",
                file=sys.stderr,
                colour="green",
                bar_format=BAR_FORMAT,
            )

    def set_current(self, label: str) -> None:
        """Show the check currently being collected after the base description."""
        if self.pbar:
            self.pbar.set_description_str(f"{self.base_desc} {label[:32]:<32}")

    def update(self, n: int = 1) -> None:
        """Update progress by n steps.

        Args:
            n: Number of steps to increment (default: 1)
        """
        if self.pbar:
            self.pbar.update(n)

    def update_on_error(self) -> None:
        """Count a failed check; the bar stays red from then on."""
        self.failures += 1
        if self.pbar:
            self.pbar.colour = "red"
            self.pbar.update(1)

    def finalize(self) -> None:
        """Set final color based on results and close progress bar."""
        if self.pbar:
            if self.failures == 0:
                self.pbar.colour = "green"
            elif self.failures == self.total_checks:
                self.pbar.colour = "red"
            else:
                self.pbar.colour = "yellow"
            self.pbar.close()
