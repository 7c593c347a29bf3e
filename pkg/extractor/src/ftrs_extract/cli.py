import argparse
import logging
import sys

from .extractor import DEFAULT_MODEL, ExtractionJob, extract


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ftrs-extract",
        description="Extract speech transformer layer features to FTRS files",
    )
    parser.add_argument("--audio-manifest", required=True)
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--layer-a", type=int, default=7)
    parser.add_argument("--layer-b", type=int, default=9)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--model", default=DEFAULT_MODEL)
    parser.add_argument("--random-init", action="store_true",
                        help="seeded random weights instead of pretrained (testing only)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    job = ExtractionJob(
        audio_manifest=args.audio_manifest, out_dir=args.out_dir,
        layer_a=args.layer_a, layer_b=args.layer_b, device=args.device,
        model=args.model, random_init=args.random_init, seed=args.seed,
    )
    result = extract(job)
    print(f"extracted {len(result.extracted)} utterances, "
          f"{len(result.failures)} failures -> {result.manifest_path}")
    return 0 if not result.failures else 2


if __name__ == "__main__":
    sys.exit(main())
