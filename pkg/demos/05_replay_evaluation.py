"""End-to-end evaluation from a replay cache.

Evaluations run offline against a content-addressed completion cache. This
demo fabricates a "perfect model" by recording each task's reference query as
its completion, then scores it: prompt -> completion -> extracted query ->
sandboxed execution -> judged verdict -> pass@1 and report files.
"""

import tempfile
from pathlib import Path

from dfqa.datasets import load_uci_sample
from dfqa.equivalence import JudgeConfig, judge
from dfqa.gateway import Gateway, GenParams
from dfqa.model import Scalar, Series
from dfqa.prompts import build_qa_prompt
from dfqa.runner import EvalConfig, emit_report, run_eval

bundle = load_uci_sample()
workdir = Path(tempfile.mkdtemp(prefix="dfqa-demo-"))
cache_dir = workdir / "cache"

model = "perfect-replay"
params = GenParams(model_name=model)
recorder = Gateway(cache_dir, mode="record")
for task in bundle.tasks:
    prompt = build_qa_prompt(bundle.supplementary, bundle.table_for(task).schema, task.question)
    completion = f"```python\n{task.reference_query.source}\n```"
    recorder.put(prompt.as_dicts(), params, completion)

cfg = EvalConfig(cache_dir=cache_dir, cache_mode="replay", pool_size=2)
report, records = run_eval(bundle, model, cfg)
print(f"pass@1 = {report.pass_at_1:.3f} over {len(records)} tasks")
print("verdicts:", {k: v for k, v in report.counts.items() if v})
print("by role:", report.breakdowns["role"])
print("by qtype:", report.breakdowns["qtype"])

paths = emit_report(report, records, workdir / "out", bundle=bundle)
print("report files:")
for name, path in sorted(paths.items()):
    print(f"  {name}: {path}")

print("\nrelaxed judging in isolation:")
truth = Scalar.of("auckland")
pred = Series(values=(Scalar.of("auckland"), Scalar.of("wellington")),
              index=(Scalar.of(0), Scalar.of(1)))
print("series containing the answer ->", judge(pred, truth, JudgeConfig()).value)
