"""
Registry Utilities

Thread-safe, weakly referenced registry used to resolve opaque handles
(such as ENTCF key identifiers) to their private evaluation data. Entries
disappear once the owner of the data is garbage collected, so long batch
runs do not accumulate tables.

Author: DIOT Lab Development Team
"""

import weakref
from threading import Lock


class HandleRegistry:
    """Maps handle identifiers to live objects without keeping them alive."""

    def __init__(self, name):
        self.name = name
        self._lock = Lock()
        self._entries = weakref.WeakValueDictionary()

    def register(self, handle_id, value):
        """
        Register ``value`` under ``handle_id``.

        Args:
            handle_id: Opaque identifier
            value: Object to resolve (must support weak references)
        """
        with self._lock:
            self._entries[handle_id] = value

    def lookup(self, handle_id, default=None):
        """
        Resolve a handle.

        Args:
            handle_id: Opaque identifier
            default: Returned when the handle is unknown or expired

        Returns:
            Registered object or default
        """
        with self._lock:
            return self._entries.get(handle_id, default)

    def __contains__(self, handle_id):
        with self._lock:
            return handle_id in self._entries

    def __len__(self):
        with self._lock:
            return len(self._entries)

    def clear(self):
        with self._lock:
            self._entries.clear()
