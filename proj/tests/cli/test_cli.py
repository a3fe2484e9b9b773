"""End-to-end checks of the txlab command line: exit codes, report schemas,
determinism and option precedence."""

import json
import os
import subprocess
import sys
import tempfile
import unittest
from pathlib import Path

import jsonschema

BINARY = None
SCHEMAS = None


def schema(name):
    return json.loads((SCHEMAS / f"{name}.schema.json").read_text())


class Cli(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)
        self.env = {k: v for k, v in os.environ.items() if not k.startswith("TXLAB_")}

    def tearDown(self):
        self.tmp.cleanup()

    def run_cli(self, *args, env=None, expect=0):
        proc = subprocess.run([BINARY, *map(str, args)], capture_output=True, text=True,
                              env=env or self.env, timeout=600)
        self.assertEqual(proc.returncode, expect, proc.stderr)
        return proc

    def report(self, out, stem):
        path = Path(out) / f"{stem}.json"
        data = json.loads(path.read_text())
        jsonschema.Draft202012Validator(schema(stem)).validate(data)
        return data

    def market(self, depth=3, kind="binomial", lam=0.1, seed=1, name="market.json"):
        out = self.dir / f"gen-{kind}-{depth}-{seed}"
        self.run_cli("gen-tree", "--kind", kind, "--depth", depth, "--lambda", lam, "--seed", seed,
                     "--name", name, "--out", out)
        self.report(out, "gen-tree")
        market = out / name
        jsonschema.Draft202012Validator(schema("market")).validate(json.loads(market.read_text()))
        return market

    def test_every_command_on_binomial(self):
        m = self.market()
        out = self.dir / "out"
        common = ["--market", m, "--out", out]
        for cmd, stem in [(["solve-primal"], "solve-primal"), (["solve-dual"], "solve-dual"),
                          (["verify-duality"], "verify-duality"), (["shadow"], "shadow"),
                          (["stability", "static"], "stability-static")]:
            self.run_cli(*cmd, *common)
            rep = self.report(out, stem)
            self.assertTrue(rep["pass"], stem)
            self.assertEqual(rep["exit_code"], 0)
            self.assertEqual(rep["version"], "1.0.0")
        self.run_cli("stability", "dynamic", *common)
        self.assertTrue(self.report(out, "stability-dynamic")["pass"])
        for f in ["primal_nodes.csv", "dual_nodes.csv", "duality_leaves.csv", "shadow_nodes.csv",
                  "stability.csv", "dynamic.csv"]:
            self.assertTrue((out / f).stat().st_size > 0, f)

    def test_duality_gap_within_tolerance(self):
        for kind, seed in [("binomial", 1), ("random", 4), ("trinomial", 2)]:
            m = self.market(depth=3, kind=kind, seed=seed)
            out = self.dir / f"vd-{kind}"
            self.run_cli("verify-duality", "--market", m, "--utility", "crra:3", "--out", out)
            rep = self.report(out, "verify-duality")
            gap = next(c for c in rep["checks"] if c["name"] == "duality_gap")
            self.assertLessEqual(gap["residual"], 1e-5)
            self.assertEqual(gap["tolerance"], 1e-5)

    def test_counterexample(self):
        out = self.dir / "cx"
        self.run_cli("counterexample", "--paths", 3000, "--seed", 1, "--dump-paths", 3,
                     "--dump-max-rows", 500, "--out", out)
        rep = self.report(out, "counterexample")
        self.assertTrue(rep["pass"])
        self.assertLessEqual(len((out / "paths.csv").read_text().splitlines()), 501)
        self.assertTrue((out / "counterexample.csv").exists())

    def test_malformed_json_is_usage_error(self):
        bad = self.dir / "bad.json"
        bad.write_text('{"horizon": 1,\n "nodes": [\n')
        proc = self.run_cli("solve-primal", "--market", bad, "--out", self.dir / "o", expect=2)
        self.assertIn("bad.json:3:", proc.stderr)

    def test_wrong_field_type_names_path(self):
        m = json.loads(self.market(depth=1).read_text())
        m["nodes"][1]["p"] = "half"
        bad = self.dir / "typed.json"
        bad.write_text(json.dumps(m))
        proc = self.run_cli("solve-dual", "--market", bad, "--out", self.dir / "o", expect=2)
        self.assertIn("nodes[1].p", proc.stderr)

    def test_infeasible_market_reports_certificate(self):
        arb = {"horizon": 1, "lambda": 0.1, "S": [1.0, 1.5, 1.6],
               "nodes": [{"id": 0, "parent": None, "t": 0, "p": 1.0},
                         {"id": 1, "parent": 0, "t": 1, "p": 0.5},
                         {"id": 2, "parent": 0, "t": 1, "p": 0.5}]}
        path = self.dir / "arb.json"
        path.write_text(json.dumps(arb))
        out = self.dir / "inf"
        self.run_cli("verify-duality", "--market", path, "--out", out, expect=1)
        rep = self.report(out, "verify-duality")
        self.assertFalse(rep["pass"])
        self.assertEqual(rep["certificate"]["node"], 0)
        self.assertEqual(rep["error"]["kind"], "infeasible")

    def test_usage_errors(self):
        self.run_cli("gen-tree", "--depth", 0, "--out", self.dir / "z", expect=2)
        self.run_cli("frobnicate", expect=2)
        self.run_cli("solve-primal", expect=2)
        self.run_cli("--help")

    def test_reports_are_deterministic(self):
        m = self.market(depth=3, kind="random", seed=9)
        a, b = self.dir / "a", self.dir / "b"
        self.run_cli("stability", "static", "--market", m, "--out", a, "--parallel", 1)
        self.run_cli("stability", "static", "--market", m, "--out", b, "--parallel", 3)
        ra, rb = self.report(a, "stability-static"), self.report(b, "stability-static")
        for r in (ra, rb):
            del r["config"]["out"], r["config"]["parallel"]
        self.assertEqual(ra, rb)
        self.assertEqual((a / "stability.csv").read_text(), (b / "stability.csv").read_text())

        g1, g2 = self.market(kind="random", seed=5, name="x.json"), self.dir / "again"
        self.run_cli("gen-tree", "--kind", "random", "--depth", 3, "--seed", 5, "--name", "x.json", "--out", g2)
        self.assertEqual(g1.read_bytes(), (g2 / "x.json").read_bytes())

    def test_option_precedence(self):
        cfg = self.dir / "cfg.toml"
        cfg.write_text("[counterexample]\npaths = 2000\nseed = 7\n")
        env = dict(self.env, TXLAB_SEED="9")
        out = self.dir / "p"

        def seed(*extra, env=env):
            self.run_cli(*extra, "counterexample", "--out", out, env=env)
            return self.report(out, "counterexample")["config"]["seed"]

        self.assertEqual(seed(env=dict(env, TXLAB_CONFIG=str(cfg))), 7)  # config beats env
        self.assertEqual(seed("--config", cfg), 7)
        cfg.write_text("[counterexample]\npaths = 2000\n")
        self.assertEqual(seed("--config", cfg), 9)  # env beats default

        self.run_cli("--config", self.dir / "p2.toml", "counterexample", "--paths", 2000, "--seed", 11,
                     "--out", out, env=env, expect=2)  # missing config file
        cfg.write_text("[counterexample]\npaths = 2000\nseed = 7\n")
        self.run_cli("--config", cfg, "counterexample", "--seed", 11, "--out", out, env=env)
        self.assertEqual(self.report(out, "counterexample")["config"]["seed"], 11)  # command line wins


if __name__ == "__main__":
    BINARY = sys.argv.pop(1)
    SCHEMAS = Path(sys.argv.pop(1))
    unittest.main()
