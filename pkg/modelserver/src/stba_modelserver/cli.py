"""stba-server: serve a victim model over the /v1 wire protocol."""

import argparse
import sys

import uvicorn

from .app import create_app
from .model import ModelLoadError, load_callable, load_json_mlp


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="stba-server")
    parser.add_argument(
        "--model", required=True, help="path to a weights JSON file, or module:callable"
    )
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument(
        "--input-shape",
        type=int,
        nargs=3,
        metavar=("C", "H", "W"),
        help="required with module:callable models",
    )
    parser.add_argument(
        "--num-classes", type=int, help="required with module:callable models"
    )
    args = parser.parse_args(argv)

    try:
        if ":" in args.model and not args.model.lower().endswith(".json"):
            if args.input_shape is None or args.num_classes is None:
                parser.error("--input-shape and --num-classes required for callables")
            model = load_callable(args.model, args.input_shape, args.num_classes)
        else:
            model = load_json_mlp(args.model)
    except (ModelLoadError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    uvicorn.run(create_app(model), host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    sys.exit(main())
