"""Ad-hoc tuning harness: run seeded trials for a config and summarize.

Not part of the package; used during development to calibrate defaults.
"""
import json
import sys
from concurrent.futures import ProcessPoolExecutor

from eiha.config import load_config
from eiha.trial import TrialConfig, run_trial


def job(args):
    overrides, condition, partner, seed = args
    base = load_config(overrides)
    res = run_trial(TrialConfig(condition=condition, partner=partner,
                                seed=seed, base=base))
    maxc = {}
    for e in res.events:
        if e['e'] == 'robot_turn':
            b = e['behavior']
            maxc[b] = max(maxc.get(b, 0), e['count'])
    return (seed, res.learned, maxc, res.time_to_learn, res.total_ticks,
            res.experience_count)


def run(overrides, seeds, condition='stm4', partner='dual_teacher', workers=2):
    jobs = [(overrides, condition, partner, s) for s in seeds]
    out = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for r in pool.map(job, jobs):
            out.append(r)
            seed, learned, maxc, ttl, ticks, n = r
            print(f"  s{seed}: pb={int(learned['peekaboo'])} dr={int(learned['drumming'])} "
                  f"chains={maxc} ttl={ttl} ticks={ticks} n={n}", flush=True)
    npb = sum(1 for _, l, *_ in out if l['peekaboo'])
    ndr = sum(1 for _, l, *_ in out if l['drumming'])
    print(f"  => peekaboo {npb}/{len(out)}, drumming {ndr}/{len(out)}")
    return out


if __name__ == '__main__':
    overrides = json.loads(sys.argv[1]) if len(sys.argv) > 1 else {}
    seeds = range(int(sys.argv[2]) if len(sys.argv) > 2 else 6)
    condition = sys.argv[3] if len(sys.argv) > 3 else 'stm4'
    run(overrides, list(seeds), condition)
