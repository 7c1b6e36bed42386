"""Disjoint-region candidate filtering (grow-and-blast).

Given split candidates with totally ordered priorities, select the set a
sequential greedy sweep would: visit candidates by descending priority and
accept each whose Delaunay region (cavity tets, boundary faces, touched
subsegments/subfaces) is disjoint from every already-accepted region.

The selection runs as bulk-synchronous passes over a claim table: every
live candidate claims its region's elements, claim conflicts blast the
lower-priority claimant, and a reclaim pass releases the claims of blasted
candidates and resurrects candidates whose only conflicts were with
now-blasted candidates.  A candidate of priority rank r is stable after r
passes, so the fixed point is reached in at most (number of candidates)
passes and equals the greedy set regardless of worker count or the order
claims are attempted in.
"""

from __future__ import annotations

import random
from collections import deque

from .errors import CavityNotStarShaped, TooClose


class ClaimTable:
    """Ownership of mesh elements by candidates during one filter pass."""

    def __init__(self, priorities):
        self.priorities = priorities   # cid -> PriorityKey (smaller wins)
        self.owners = {}               # element key -> cid
        self.blasted = set()
        self.regions = {}              # cid -> frozenset of element keys
        self.pending = {}              # cid -> deque of unclaimed elements

    def reset(self):
        self.owners = {}
        self.blasted = set()

    def claim(self, key, cid) -> bool:
        """Attempt to claim an element; the lower-priority side of any
        conflict is blasted.  Returns True when cid holds the element."""
        cur = self.owners.get(key)
        if cur is None:
            self.owners[key] = cid
            return True
        if cur == cid:
            return True
        if self.priorities[cid] < self.priorities[cur]:
            self.owners[key] = cid
            self.blasted.add(cur)
            return True
        self.blasted.add(cid)
        return False


def region_keys(region):
    """Hashable claim keys of a Delaunay region (cached per region)."""
    keys = getattr(region, "_claim_keys", None)
    if keys is None:
        keys = frozenset((ref.kind, ref.index)
                         for ref in region.element_refs())
        region._claim_keys = keys
    return keys


def claim_keys(candidate):
    """Full claim set of a candidate: its region's elements plus any
    extra elements its insertion would rewrite (e.g. the planar cavity of
    a constraint split)."""
    return region_keys(candidate.region) \
        | frozenset(getattr(candidate, "claim_extra", ()) or ())


def grow_step(mesh, claims, frontier):
    """One bulk-synchronous growth step.

    frontier holds (candidate id, element key) pairs adjacent to their
    candidate's claimed set.  Each entry is membership-tested against the
    candidate's region and claimed on success; newly claimed entries emit
    the candidate's next unclaimed element as the next frontier.  Blasted
    candidates stop growing.
    """
    nxt = []
    for cid, key in frontier:
        if cid in claims.blasted:
            continue
        if key not in claims.regions[cid]:
            continue  # not a member: growth stops along this branch
        if claims.claim(key, cid):
            pend = claims.pending.get(cid)
            while pend:
                follow = pend.popleft()
                if follow not in claims.owners or \
                        claims.owners.get(follow) != cid:
                    nxt.append((cid, follow))
                    break
    return nxt


def reclaim_pass(mesh, claims, blasted):
    """Release all elements owned by blasted candidates; resurrect
    candidates whose conflicts were only with blasted candidates.
    Returns (released element keys, resurrected candidate ids)."""
    released = [key for key, cid in claims.owners.items() if cid in blasted]
    for key in released:
        del claims.owners[key]
    resurrected = set()
    for cid in blasted:
        hit = False
        for key in claims.regions[cid]:
            owner = claims.owners.get(key)
            if owner is not None and owner != cid \
                    and claims.priorities[owner] < claims.priorities[cid]:
                hit = True
                break
        if not hit:
            resurrected.add(cid)
    claims.blasted -= resurrected
    return released, resurrected


def filter_candidates(mesh, candidates, workers=1, schedule_seed=0):
    """Select the greedy-by-priority maximal set of candidates with
    mutually disjoint Delaunay regions.

    Returns (accepted, rejected, failed): accepted candidates carry their
    regions; rejected ones conflicted with an accepted region; failed ones
    could not form a region (TooClose / CavityNotStarShaped) and carry the
    error name in .fail_reason.
    """
    ok = []
    failed = []
    for c in candidates:
        if c.region is None:
            seed = getattr(c, "seed", None)
            if seed is None:
                seed = c.target
            try:
                c.region = mesh.delaunay_region(
                    c.point, seed, allowed_cross=c.allowed_cross)
            except TooClose:
                c.fail_reason = "too_close"
                failed.append(c)
                continue
            except CavityNotStarShaped:
                c.fail_reason = "cavity_not_star_shaped"
                failed.append(c)
                continue
        if c.region.min_vertex_dist_sq <= mesh.too_close_sq:
            c.fail_reason = "too_close"
            failed.append(c)
            continue
        ok.append(c)

    priorities = {i: c.priority for i, c in enumerate(ok)}
    claims = ClaimTable(priorities)
    for i, c in enumerate(ok):
        claims.regions[i] = claim_keys(c)

    rng = random.Random(schedule_seed)

    def launch(cids):
        # seed every candidate's growth; entries are sharded across
        # workers in a seeded order, which cannot change the outcome
        # because claim conflicts resolve by priority
        order = sorted(cids)
        rng.shuffle(order)
        shards = [order[w::max(1, workers)] for w in range(max(1, workers))]
        frontier = []
        for shard in shards:
            for cid in shard:
                elems = sorted(claims.regions[cid])
                claims.pending[cid] = deque(elems[1:])
                frontier.append((cid, elems[0]))
        while frontier:
            frontier = grow_step(mesh, claims, frontier)

    launch(range(len(ok)))
    # a blasted candidate's claims are stale until released; iterate
    # release + resurrection to a fixed point (at most one pass per
    # priority rank, so this terminates)
    while True:
        _, resurrected = reclaim_pass(mesh, claims, set(claims.blasted))
        if not resurrected:
            break
        launch(resurrected)

    accepted = sorted((ok[cid] for cid in range(len(ok))
                       if cid not in claims.blasted),
                      key=lambda c: c.priority)
    rejected = [ok[cid] for cid in sorted(claims.blasted)]
    return accepted, rejected, failed


def greedy_oracle(mesh, candidates):
    """Reference semantics: sequential greedy sweep by priority."""
    ok = [c for c in candidates if c.region is not None]
    claimed = set()
    accepted = []
    for c in sorted(ok, key=lambda c: c.priority):
        keys = claim_keys(c)
        if keys & claimed:
            continue
        claimed |= keys
        accepted.append(c)
    return accepted
