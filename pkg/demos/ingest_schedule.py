"""
How the archive is paged
========================

Shows the 50-minute request windows for one Eastern trading day and how a
window that comes back full is refetched in five 10-minute pieces. Runs
offline; nothing is requested.
"""

import datetime as dt
from zoneinfo import ZoneInfo

from redditfactors.ingest import TickerSpec, chunk_schedule, detect_mentions, normalize_text, split_window

eastern = ZoneInfo("America/New_York")
day = dt.date(2018, 9, 28)
start = int(dt.datetime.combine(day, dt.time(), eastern).timestamp())
end = int(dt.datetime.combine(day + dt.timedelta(1), dt.time(), eastern).timestamp())

windows = chunk_schedule(start, end)
print(f"{len(windows)} windows cover {day}")
for w in windows[:3]:
    print(" ", dt.datetime.fromtimestamp(w.after_utc, eastern).time(),
          "->", dt.datetime.fromtimestamp(w.before_utc, eastern).time())
print("  ...")
print("  last window is", windows[-1].seconds, "seconds")

# pretend the fourth window came back with the full 5000 records
for w in split_window(windows[3]):
    print("  refetch", dt.datetime.fromtimestamp(w.after_utc, eastern).time(), w.seconds, "s")

# mention tagging is whole-word and case-insensitive
universe = [TickerSpec("tsla", frozenset({"tesla"})), TickerSpec("wmt", frozenset({"walmart"}))]
for raw in ["Tesla to the MOON 🚀", "walmarts are everywhere", "WMT puts and $TSLA calls"]:
    body = normalize_text(raw)
    print(f"{body!r:35s}", sorted(detect_mentions(body, universe)))
