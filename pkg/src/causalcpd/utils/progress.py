"""Progress reporting utilities with fallback to basic logging."""

import logging
from typing import Any, Optional

from rich.progress import Progress

logger = logging.getLogger(__name__)


class ProgressReporter:
    """
    Progress reporting interface with fallbacks.

    Uses a rich Progress bar when one is supplied, otherwise logs a line
    every ``log_every`` steps so long Monte-Carlo batches stay observable in
    plain log output.
    """

    def __init__(
        self,
        progress_bar: Optional[Progress] = None,
        description: str = "Progress",
        total: int = 100,
        log_every: int = 10,
    ):
        """
        Initialize progress reporter.

        Args:
            progress_bar: Optional Rich Progress instance
            description: Default description for the progress bar
            total: Total steps for the progress
            log_every: Logging interval (in steps) when there is no progress bar
        """
        self.progress_bar = progress_bar
        self.description = description
        self.total = total
        self.log_every = max(1, log_every)
        self.task_id = None
        self._current = 0

        if self.progress_bar is not None:
            self.task_id = self.progress_bar.add_task(
                description, total=total, visible=True
            )

    @property
    def current(self) -> int:
        return self._current

    def update(
        self,
        advance: Optional[int] = None,
        current: Optional[int] = None,
        description: Optional[str] = None,
        **kwargs: Any,
    ) -> None:
        """
        Update progress.

        Args:
            advance: Number of steps to advance (if None, current is used)
            current: Current progress value (if None, advance is used)
            description: New description (if None, use existing)
            **kwargs: Additional kwargs passed to progress_bar.update
        """
        previous = self._current
        if current is not None:
            self._current = current
        elif advance is not None:
            self._current += advance

        desc = description or self.description

        if self.progress_bar is not None and self.task_id is not None:
            update_kwargs = dict(kwargs)
            if description:
                update_kwargs["description"] = description
            update_kwargs["completed"] = self._current
            self.progress_bar.update(self.task_id, **update_kwargs)
            return

        crossed = self._current // self.log_every != previous // self.log_every
        if crossed or self._current >= self.total:
            percent = (
                f" [{self._current / self.total * 100:.1f}%]" if self.total > 0 else ""
            )
            logger.info(f"{desc}{percent} ({self._current}/{self.total})")

    def complete(self, description: Optional[str] = None) -> None:
        """
        Mark the progress as complete.

        Args:
            description: Final description for the completed progress
        """
        final = description or f"{self.description} - Complete"
        if self.progress_bar is not None and self.task_id is not None:
            self.progress_bar.update(
                self.task_id, completed=self.total, description=final
            )
        else:
            logger.info(f"{final} (100%)")
