"""Launcher: `fpvclient <tracker>` serves the chosen tracker over stdio."""

from __future__ import annotations

import argparse
import sys

from fpvclient.adapter import serve
from fpvclient.trackers import CenterBoxTracker, EchoTracker, TemplateTracker


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fpvclient",
        description="Reference tracking clients speaking the runner wire "
                    "protocol over standard input/output.",
    )
    parser.add_argument("tracker", choices=("echo", "center-box", "template"))
    parser.add_argument("--frame-size", default=None, metavar="WxH",
                        help="frame dimensions for center-box when frame "
                             "refs are not image paths")
    parser.add_argument("--margin", type=int, default=12,
                        help="template search margin in pixels (default 12)")
    args = parser.parse_args(argv)

    if args.tracker == "echo":
        tracker = EchoTracker()
    elif args.tracker == "center-box":
        frame_size = None
        if args.frame_size is not None:
            try:
                w, h = args.frame_size.lower().split("x")
                frame_size = (float(w), float(h))
            except ValueError:
                parser.error(f"bad --frame-size {args.frame_size!r}")
        tracker = CenterBoxTracker(frame_size=frame_size)
    else:
        tracker = TemplateTracker(margin=args.margin)
    return serve(tracker, name=args.tracker)


if __name__ == "__main__":
    sys.exit(main())
