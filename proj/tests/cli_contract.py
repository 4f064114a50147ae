"""Command-line contract: exit codes, outputs, byte-identical re-runs.

Usage: cli_contract.py <path to evtrojan binary>
"""

import json
import os
import shutil
import struct
import subprocess
import sys
import tempfile
import unittest
from pathlib import Path

BIN = None

# Files whose content carries wall-clock data.
VOLATILE = {"manifest.json", "times.json"}


def run(*args, env=None):
    full_env = dict(os.environ)
    full_env.update(env or {})
    return subprocess.run([BIN, *map(str, args)], capture_output=True, text=True, env=full_env)


def tree_bytes(root):
    root = Path(root)
    if root.is_file():
        return {root.name: root.read_bytes()}
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file() and p.name not in VOLATILE and not p.name.endswith(".manifest.json")
    }


def read_dump(path):
    raw = Path(path).read_bytes()
    magic, method, _, c, h, w, _ = struct.unpack("<4sBBHHHI", raw[:16])
    assert magic == b"EVTR"
    assert len(raw) == 16 + 4 * c * h * w
    return method, c, h, w


class Workspace:
    """A small dataset, a trained mutable checkpoint and a triggered test set."""

    def __init__(self):
        self.dir = Path(tempfile.mkdtemp(prefix="evtrojan_cli_"))
        self.recipe = self.dir / "recipe.json"
        self.recipe.write_text(json.dumps({"samples": 60}))
        self.train_cfg = self.dir / "train.json"
        self.train_cfg.write_text(json.dumps({
            "epochs": 2, "hidden": 16, "lr_classifier": 0.01,
            "poison": {"rho": 0.2, "target": 1, "mode": "mutable"},
        }))
        self.ds = self.dir / "ds"
        check(run("synth", "--config", self.recipe, "--out", self.ds, "--seed", 3))
        self.ckpt = self.dir / "ckpt"
        check(run("train", "--config", self.train_cfg, "--data", self.ds / "train", "--out", self.ckpt))
        self.poisoned = self.dir / "poisoned"
        check(run("poison", "--mode", "mutable", "--generator", self.ckpt, "--in", self.ds / "test",
                  "--out", self.poisoned, "--rho", 1, "--target", 1))

    def path(self, name):
        return self.dir / name


def check(proc):
    if proc.returncode != 0:
        raise AssertionError(f"exit {proc.returncode}: {proc.stderr}")
    return proc


WS = None


class CliTest(unittest.TestCase):
    def assertExit(self, proc, code):
        self.assertEqual(proc.returncode, code, proc.stderr)

    def assertRerunIdentical(self, args, out):
        first = tree_bytes(out)
        shutil.rmtree(out) if Path(out).is_dir() else Path(out).unlink()
        self.assertExit(run(*args), 0)
        self.assertEqual(first, tree_bytes(out))


class Synth(CliTest):
    def test_missing_config_is_usage_error(self):
        proc = run("synth", "--out", WS.path("nope"))
        self.assertExit(proc, 2)
        self.assertIn("--config", proc.stderr)

    def test_splits_and_counts(self):
        counts = {s: len(list((WS.ds / s).glob("*.bin"))) for s in ("train", "val", "test")}
        self.assertEqual(counts, {"train": 36, "val": 12, "test": 12})
        labels = json.loads((WS.ds / "train" / "labels.json").read_text())
        self.assertEqual(len(labels), 36)
        ids = set()
        for s in ("train", "val", "test"):
            ids |= set(json.loads((WS.ds / s / "labels.json").read_text()))
        self.assertEqual(len(ids), 60)

    def test_same_seed_identical_bytes(self):
        out = WS.path("synth_again")
        self.assertExit(run("synth", "--config", WS.recipe, "--out", out, "--seed", 3), 0)
        self.assertEqual(tree_bytes(WS.ds / "train"), tree_bytes(out / "train"))
        self.assertEqual(tree_bytes(WS.ds / "test"), tree_bytes(out / "test"))

    def test_invalid_recipe(self):
        bad = WS.path("bad_recipe.json")
        bad.write_text(json.dumps({"sample": 3}))
        self.assertExit(run("synth", "--config", bad, "--out", WS.path("x")), 2)


class Poison(CliTest):
    def test_rho_zero_is_a_byte_identical_copy(self):
        out = WS.path("p0")
        self.assertExit(run("poison", "--mode", "immutable", "--in", WS.ds / "test", "--out", out, "--rho", 0), 0)
        src = tree_bytes(WS.ds / "test")
        dst = tree_bytes(out)
        for name, data in src.items():
            self.assertEqual(dst[name], data, name)
        flags = json.loads((out / "flags.json").read_text())
        self.assertFalse(any(flags.values()))

    def test_rho_one_relabels_everything(self):
        labels = json.loads((WS.poisoned / "labels.json").read_text())
        self.assertTrue(labels)
        self.assertTrue(all(v == 1 for v in labels.values()))
        flags = json.loads((WS.poisoned / "flags.json").read_text())
        self.assertTrue(all(flags.values()))

    def test_mutable_needs_generator(self):
        self.assertExit(run("poison", "--mode", "mutable", "--in", WS.ds / "test", "--out", WS.path("pm")), 2)

    def test_unknown_mode(self):
        self.assertExit(run("poison", "--mode", "fiba", "--in", WS.ds / "test", "--out", WS.path("pf")), 2)

    def test_rerun_identical(self):
        out = WS.path("pi")
        args = ("poison", "--mode", "immutable", "--in", WS.ds / "test", "--out", out, "--rho", 0.5, "--seed", 4)
        self.assertExit(run(*args), 0)
        self.assertRerunIdentical(args, out)


class Represent(CliTest):
    def test_unknown_method(self):
        self.assertExit(run("represent", "--method", "hats", "--in", WS.ds / "test", "--out", WS.path("r0")), 2)

    def test_empty_input_dir(self):
        empty = WS.path("empty")
        empty.mkdir(exist_ok=True)
        out = WS.path("r_empty")
        proc = run("represent", "--method", "est", "--in", empty, "--out", out)
        self.assertExit(proc, 0)
        self.assertIn("warning", proc.stderr)
        self.assertEqual(list(out.glob("*.evtr")), [])

    def test_outputs_parse_back(self):
        out = WS.path("r_vg")
        args = ("represent", "--method", "vg", "--bins", 5, "--in", WS.ds / "test", "--out", out)
        self.assertExit(run(*args), 0)
        dumps = sorted(out.glob("*.evtr"))
        self.assertEqual(len(dumps), 12)
        for d in dumps:
            self.assertEqual(read_dump(d), (3, 5, 32, 32))
        times = json.loads((out / "times.json").read_text())
        self.assertEqual(set(times), {d.stem for d in dumps})
        self.assertRerunIdentical(args, out)

    def test_thread_count_does_not_change_output(self):
        a, b = WS.path("r_t1"), WS.path("r_t4")
        base = ("represent", "--method", "est", "--in", WS.ds / "train")
        self.assertExit(run(*base, "--out", a, env={"EVT_THREADS": "1"}), 0)
        self.assertExit(run(*base, "--out", b, env={"EVT_THREADS": "4"}), 0)
        self.assertEqual(tree_bytes(a), tree_bytes(b))
        self.assertExit(run(*base, "--out", WS.path("r_t0"), env={"EVT_THREADS": "0"}), 2)


class Train(CliTest):
    def test_outputs(self):
        for name in ("model.evtm", "generator.evtg", "history.jsonl", "config.json", "manifest.json"):
            self.assertTrue((WS.ckpt / name).exists(), name)
        history = (WS.ckpt / "history.jsonl").read_text().splitlines()
        self.assertEqual(len(history), 2)
        manifest = json.loads((WS.ckpt / "manifest.json").read_text())
        self.assertEqual(len(manifest["config_digest"]), 16)

    def test_bad_flags(self):
        self.assertExit(run("train", "--config", WS.train_cfg, "--out", WS.path("t0")), 2)
        self.assertExit(run("train", "--bogus"), 2)

    def test_rerun_identical(self):
        out = WS.path("t_again")
        args = ("train", "--config", WS.train_cfg, "--data", WS.ds / "train", "--out", out)
        self.assertExit(run(*args), 0)
        self.assertEqual(tree_bytes(WS.ckpt), tree_bytes(out))


class Eval(CliTest):
    def args(self, out):
        return ("eval", "--ckpt", WS.ckpt, "--clean", WS.ds / "test", "--poisoned", WS.poisoned, "--out", out)

    def test_report_fields_and_rerun(self):
        out = WS.path("reports") / "eval.json"
        self.assertExit(run(*self.args(out)), 0)
        report = json.loads(out.read_text())
        for key in ("cda", "asr", "psnr_db", "ssim", "n_clean", "n_poisoned", "target_class"):
            self.assertIn(key, report)
        self.assertEqual(report["n_clean"], 12)
        self.assertEqual(report["target_class"], 1)
        self.assertTrue(0.0 <= report["cda"] <= 1.0)
        self.assertRerunIdentical(self.args(out), out)

    def test_bad_flags(self):
        self.assertExit(run("eval", "--ckpt", WS.ckpt), 2)

    def test_corrupt_checkpoint_is_runtime_failure(self):
        broken = WS.path("broken")
        shutil.copytree(WS.ckpt, broken, dirs_exist_ok=True)
        (broken / "model.evtm").write_bytes(b"EVTM\x01")
        self.assertExit(run("eval", "--ckpt", broken, "--clean", WS.ds / "test", "--poisoned", WS.poisoned,
                            "--out", WS.path("x.json")), 1)


class Filter(CliTest):
    def test_stc(self):
        out = WS.path("filtered")
        args = ("filter", "stc", "--in", WS.poisoned, "--out", out)
        self.assertExit(run(*args), 0)
        self.assertTrue((out / "flags.json").exists())
        src = sum(p.stat().st_size for p in WS.poisoned.glob("*.bin"))
        dst = sum(p.stat().st_size for p in out.glob("*.bin"))
        self.assertLessEqual(dst, src)
        self.assertRerunIdentical(args, out)

    def test_bad_config(self):
        self.assertExit(run("filter", "stc", "--in", WS.poisoned, "--out", WS.path("f0"), "--radius", 0), 2)
        self.assertExit(run("filter", "--in", WS.poisoned), 2)


class Stealth(CliTest):
    def test_pairs_and_rerun(self):
        clean, pois = WS.path("s_clean"), WS.path("s_pois")
        check(run("represent", "--method", "est", "--in", WS.ds / "test", "--out", clean))
        check(run("represent", "--method", "est", "--in", WS.poisoned, "--out", pois))
        out = WS.path("stealth.json")
        args = ("stealth", "--clean", clean, "--poisoned", pois, "--out", out)
        self.assertExit(run(*args), 0)
        report = json.loads(out.read_text())
        self.assertEqual(report["pairs"], 12)
        self.assertTrue(report["ssim"] <= 1.0)
        self.assertRerunIdentical(args, out)

        same = WS.path("stealth_same.json")
        self.assertExit(run("stealth", "--clean", clean, "--poisoned", clean, "--out", same), 0)
        self.assertEqual(json.loads(same.read_text())["psnr_db"], "inf")

    def test_bad_flags(self):
        self.assertExit(run("stealth", "--clean", WS.ds), 2)


class Report(CliTest):
    def test_svgs(self):
        a, b = WS.path("run_a.json"), WS.path("run_b.json")
        a.write_text(json.dumps({"cda": 0.9, "asr": 0.95, "psnr_db": 40.5}))
        b.write_text(json.dumps({"cda": 0.8, "asr": 0.5, "psnr_db": "inf"}))
        out = WS.path("figs")
        args = ("report", "--in", a, b, "--out", out)
        self.assertExit(run(*args), 0)
        for name in ("cda.svg", "asr.svg", "psnr.svg"):
            text = (out / name).read_text()
            self.assertTrue(text.startswith("<svg"))
            self.assertIn("run_a", text)
        self.assertIn(">inf<", (out / "psnr.svg").read_text())
        self.assertRerunIdentical(args, out)

    def test_bad_flags(self):
        self.assertExit(run("report", "--in", WS.path("missing.json"), "--out", WS.path("f")), 2)


class Global(CliTest):
    def test_no_subcommand(self):
        self.assertExit(run(), 2)

    def test_help(self):
        self.assertExit(run("--help"), 0)


if __name__ == "__main__":
    BIN = sys.argv.pop(1)
    WS = Workspace()
    try:
        unittest.main(verbosity=2)
    finally:
        shutil.rmtree(WS.dir, ignore_errors=True)
