#!/usr/bin/env python3
"""Convert a COVID-19 Open Data (v3) location CSV to the region CSV schema.

The source needs the columns date, cumulative_confirmed, cumulative_recovered
and cumulative_deceased. Blank cumulative values are carried forward from the
previous day; leading blanks become 0.

    tools/fetch_fixtures.py --source CN_HB.csv --start 2020-01-24 \
        --end 2020-04-15 --out data/CN-WH.csv

--source may also be an http(s) URL, e.g.
https://storage.googleapis.com/covid19-open-data/v3/location/<key>.csv
"""

import argparse
import csv
import io
import sys
import urllib.request

COLUMNS = {
    "cumulative_cases": "cumulative_confirmed",
    "recovered": "cumulative_recovered",
    "deaths": "cumulative_deceased",
}


def open_source(source):
    if source.startswith(("http://", "https://")):
        with urllib.request.urlopen(source, timeout=60) as response:
            return io.StringIO(response.read().decode("utf-8"))
    return open(source, newline="", encoding="utf-8")


def convert(reader, start, end):
    missing = [c for c in ["date", *COLUMNS.values()] if c not in reader.fieldnames]
    if missing:
        raise SystemExit(f"source lacks columns: {', '.join(missing)}")
    last = {k: 0.0 for k in COLUMNS}
    rows = []
    for record in reader:
        date = record["date"]
        if (start and date < start) or (end and date > end):
            continue
        row = {"date": date}
        for ours, theirs in COLUMNS.items():
            value = record[theirs].strip()
            if value:
                last[ours] = float(value)
            row[ours] = last[ours]
        rows.append(row)
    return rows


def fmt(x):
    return str(int(x)) if x == int(x) else repr(x)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--source", required=True, help="local path or URL of the source CSV")
    parser.add_argument("--start", help="first date to keep (YYYY-MM-DD)")
    parser.add_argument("--end", help="last date to keep (YYYY-MM-DD)")
    parser.add_argument("--out", default="-", help="output path, '-' for stdout")
    args = parser.parse_args()

    with open_source(args.source) as handle:
        rows = convert(csv.DictReader(handle), args.start, args.end)
    if not rows:
        raise SystemExit("no rows in the requested date range")

    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="", encoding="utf-8")
    try:
        out.write("date,cumulative_cases,recovered,deaths\n")
        for row in rows:
            out.write(",".join([row["date"]] + [fmt(row[k]) for k in COLUMNS]) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()


if __name__ == "__main__":
    main()
