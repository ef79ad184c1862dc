#!/usr/bin/env python3
"""Regenerates the procedurally defined benchmark fixtures in data/.

dectiger.dpomdp is hand written and not touched by this script.

grid3x3corners: two agents on a 3x3 grid (cells numbered row-major from the
top-left). Each agent moves up/down/left/right or stays; a move succeeds with
probability 0.7 and otherwise leaves the agent in place. Moving into the
outer wall leaves the agent in place. The start position of both agents is
uniform over the grid. Each agent privately observes whether it currently
stands in a corner cell. The team earns 1 at every step in which both agents
occupy the same goal corner (top-left or bottom-right).

boxpushing: two agents in the bottom row of a 3x4 grid. The middle row holds
a small box in column 0, a large box across columns 1-2 and a small box in
column 3; the top row is the goal row. Agent 1 is always left of agent 2, so
a configuration is (col1 < col2, heading1, heading2): 6 * 16 = 96 states,
plus four "delivered" states that send the team back to the start
configuration on the next step (100 states in total). Actions are
turn-left, turn-right, move-forward and stay; turns and moves succeed with
probability 0.9. Facing north and moving pushes the box in front: a small
box is delivered alone (+10), the large box needs both agents pushing it in
the same step (+100). Bumping into a wall, the other agent or pushing the
large box alone costs 5; every agent pays 0.1 per step. Each agent observes
what is in the cell it faces: empty, wall, agent, small-box, large-box.
"""

import itertools
import pathlib

DATA = pathlib.Path(__file__).resolve().parent.parent / "data"


def fmt(p):
    return repr(round(p, 12))


def write_grid():
    moves = ["up", "down", "left", "right", "stay"]
    success = 0.7
    corners = {0, 2, 6, 8}
    goals = {0, 8}

    def move(cell, action):
        r, c = divmod(cell, 3)
        if action == "up":
            r = max(0, r - 1)
        elif action == "down":
            r = min(2, r + 1)
        elif action == "left":
            c = max(0, c - 1)
        elif action == "right":
            c = min(2, c + 1)
        return r * 3 + c

    def outcomes(cell, action):
        if action == "stay":
            return {cell: 1.0}
        dst = move(cell, action)
        if dst == cell:
            return {cell: 1.0}
        return {dst: success, cell: 1.0 - success}

    states = [(a, b) for a in range(9) for b in range(9)]
    name = lambda s: f"a{s[0]}b{s[1]}"
    lines = [
        "# Meeting in a 3x3 grid: both agents must gather in the top-left or",
        "# bottom-right corner. Generated by tools/make_fixtures.py.",
        "agents: 2",
        "discount: 1",
        "values: reward",
        "states: " + " ".join(name(s) for s in states),
        "start:",
        "uniform",
        "actions:",
        " ".join(moves),
        " ".join(moves),
        "observations:",
        "corner open",
        "corner open",
    ]
    for a1, a2 in itertools.product(moves, moves):
        for s in states:
            o1 = outcomes(s[0], a1)
            o2 = outcomes(s[1], a2)
            for (d1, p1), (d2, p2) in itertools.product(o1.items(), o2.items()):
                lines.append(f"T: {a1} {a2} : {name(s)} : {name((d1, d2))} : {fmt(p1 * p2)}")
    for s in states:
        o = lambda c: "corner" if c in corners else "open"
        lines.append(f"O: * : {name(s)} : {o(s[0])} {o(s[1])} : 1")
    for s in states:
        if s[0] == s[1] and s[0] in goals:
            lines.append(f"R: * : {name(s)} : * : * : 1")
    (DATA / "grid3x3corners.dpomdp").write_text("\n".join(lines) + "\n")


def write_boxpushing():
    actions = ["turn-left", "turn-right", "move", "stay"]
    observations = ["empty", "wall", "agent", "small-box", "large-box"]
    headings = ["N", "E", "S", "W"]
    success = 0.9
    configs = [(c1, c2, h1, h2) for c1 in range(4) for c2 in range(4) if c1 < c2
               for h1 in headings for h2 in headings]
    delivered = ["delivered-small-left", "delivered-small-right",
                 "delivered-large", "delivered-two-small"]
    cname = lambda c: f"p{c[0]}{c[1]}{c[2]}{c[3]}"
    start = (0, 3, "E", "W")

    def turn(h, a):
        i = headings.index(h)
        if a == "turn-left":
            return headings[(i + 3) % 4]
        if a == "turn-right":
            return headings[(i + 1) % 4]
        return h

    def faced(col, h, other):
        if h == "N":
            return "small-box" if col in (0, 3) else "large-box"
        if h == "S":
            return "wall"
        nxt = col + (1 if h == "E" else -1)
        if nxt < 0 or nxt > 3:
            return "wall"
        if nxt == other:
            return "agent"
        return "empty"

    def joint_outcomes(cfg, a1, a2):
        """Returns {(next_state, reward): probability}."""
        c1, c2, h1, h2 = cfg
        result = {}
        for ok1, ok2 in itertools.product([True, False], [True, False]):
            p = (success if ok1 else 1 - success) * (success if ok2 else 1 - success)
            e1 = a1 if ok1 else "stay"
            e2 = a2 if ok2 else "stay"
            reward = -0.2
            n1, n2, g1, g2 = c1, c2, h1, h2
            push1 = e1 == "move" and h1 == "N"
            push2 = e2 == "move" and h2 == "N"
            small_left = push1 and c1 == 0
            small_right = push2 and c2 == 3
            large = push1 and push2 and c1 == 1 and c2 == 2
            lone_large = (push1 and c1 in (1, 2)) != (push2 and c2 in (1, 2)) and not large
            if large:
                nxt, reward = "delivered-large", reward + 100
            elif small_left and small_right:
                nxt, reward = "delivered-two-small", reward + 20
            elif small_left:
                nxt, reward = "delivered-small-left", reward + 10
            elif small_right:
                nxt, reward = "delivered-small-right", reward + 10
            else:
                nxt = None
            if lone_large:
                reward -= 5
            if nxt is None:
                g1, g2 = turn(h1, e1), turn(h2, e2)
                want1 = c1 + (1 if h1 == "E" else -1) if e1 == "move" and h1 in "EW" else c1
                want2 = c2 + (1 if h2 == "E" else -1) if e2 == "move" and h2 in "EW" else c2
                bump1 = e1 == "move" and h1 == "S"
                bump2 = e2 == "move" and h2 == "S"
                if want1 < 0 or want1 > 3:
                    want1, bump1 = c1, True
                if want2 < 0 or want2 > 3:
                    want2, bump2 = c2, True
                # agents never enter the other's cell nor the same free cell
                block1 = want1 != c1 and (want1 == c2 or want1 == want2)
                block2 = want2 != c2 and (want2 == c1 or want2 == want1)
                if block1:
                    want1, bump1 = c1, True
                if block2:
                    want2, bump2 = c2, True
                n1, n2 = want1, want2
                reward -= 5 * (bump1 + bump2)
                nxt = cname((n1, n2, g1, g2))
            key = (nxt, round(reward, 10))
            result[key] = result.get(key, 0.0) + p
        return result

    names = [cname(c) for c in configs] + delivered
    lines = [
        "# Cooperative box pushing on a 3x4 grid. Generated by tools/make_fixtures.py.",
        "agents: 2",
        "discount: 1",
        "values: reward",
        "states: " + " ".join(names),
        "start: " + cname(start),
        "actions:",
        " ".join(actions),
        " ".join(actions),
        "observations:",
        " ".join(observations),
        " ".join(observations),
    ]
    rewards = []
    for a1, a2 in itertools.product(actions, actions):
        for cfg in configs:
            outs = joint_outcomes(cfg, a1, a2)
            trans = {}
            expected = 0.0
            for (nxt, r), p in outs.items():
                trans[nxt] = trans.get(nxt, 0.0) + p
                expected += p * r
            rewards.append((a1, a2, cname(cfg), expected))
            for nxt, p in trans.items():
                lines.append(f"T: {a1} {a2} : {cname(cfg)} : {nxt} : {fmt(p)}")
        for d in delivered:
            lines.append(f"T: {a1} {a2} : {d} : {cname(start)} : 1")
    for cfg in configs:
        c1, c2, h1, h2 = cfg
        lines.append(f"O: * : {cname(cfg)} : {faced(c1, h1, c2)} {faced(c2, h2, c1)} : 1")
    for d in delivered:
        lines.append(f"O: * : {d} : empty empty : 1")
    for a1, a2, s, r in rewards:
        lines.append(f"R: {a1} {a2} : {s} : * : * : {fmt(r)}")
    for d in delivered:
        lines.append(f"R: * : {d} : * : * : -0.2")
    (DATA / "boxpushing.dpomdp").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    write_grid()
    write_boxpushing()
