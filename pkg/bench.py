"""Focused peekaboo-learning bench with phase telemetry (dev tool)."""
import sys
import json
import collections
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from eiha.config import load_config
from eiha.trial import TickEngine, make_rng_streams
from eiha.partner import ScriptedPartner, PartnerScript


def run_one(args):
    overrides, seed, seconds, variant = args
    cfg = load_config(overrides)
    core, prng = make_rng_streams(seed)
    engine = TickEngine(cfg, rng=core)
    partner = ScriptedPartner(PartnerScript.from_config(variant, cfg, seed), cfg, rng=prng)
    obs = None
    phase = 'idle'   # idle | teacher_hide | afterglow
    afterglow = 0
    phase_actions = collections.defaultdict(collections.Counter)
    for t in range(int(seconds * cfg.resolution)):
        state = partner.step(obs, t)
        out = engine.tick(state)
        if state.hiding:
            phase = 'teacher_hide'
            afterglow = 25
        elif afterglow > 0:
            phase = 'post_reveal'
            afterglow -= 1
        else:
            phase = 'idle'
        if out.observed.action_started:
            phase_actions[phase][out.action.value] += 1
        obs = out.observed
        if engine.ledger.ledgers and all(l.learned for l in engine.ledger.ledgers.values()):
            pass
    led = engine.ledger.ledgers
    from eiha.actions import Behavior
    pb = led[Behavior.PEEKABOO]
    maxchain = max((e['count'] for e in engine.ledger.events
                    if e['e'] == 'robot_turn' and e['behavior'] == 'peekaboo'),
                   default=0)
    hs = np.array(engine.traces['hide'])
    return {
        'seed': seed,
        'learned': pb.learned,
        'learned_tick': pb.learned_tick,
        'maxchain': maxchain,
        'robot_turns': sum(1 for e in engine.ledger.events
                           if e['e'] == 'robot_turn' and e['behavior'] == 'peekaboo'),
        'human_turns': sum(1 for e in engine.ledger.events
                           if e['e'] == 'human_turn' and e['behavior'] == 'peekaboo'),
        'hide_score_frac': float((hs > 0).mean()),
        'phases': {k: dict(v.most_common(4)) for k, v in phase_actions.items()},
        'n_exp': len(engine.space),
    }


def main():
    overrides = json.loads(sys.argv[1]) if len(sys.argv) > 1 else {}
    seconds = float(sys.argv[2]) if len(sys.argv) > 2 else 400
    nseeds = int(sys.argv[3]) if len(sys.argv) > 3 else 6
    variant = sys.argv[4] if len(sys.argv) > 4 else 'peekaboo_teacher'
    jobs = [(overrides, s, seconds, variant) for s in range(nseeds)]
    rows = []
    with ProcessPoolExecutor(max_workers=2) as pool:
        for r in pool.map(run_one, jobs):
            rows.append(r)
            print(f"s{r['seed']}: learned={int(r['learned'])} chain={r['maxchain']} "
                  f"R={r['robot_turns']} H={r['human_turns']} "
                  f"hs%={r['hide_score_frac']:.2f} n={r['n_exp']}", flush=True)
    n = sum(1 for r in rows if r['learned'])
    print(f"=> learned {n}/{len(rows)}")
    print("phase behavior (seed 0):")
    for k, v in rows[0]['phases'].items():
        print(f"   {k}: {v}")


if __name__ == '__main__':
    main()
