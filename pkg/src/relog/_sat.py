"""Compact CDCL SAT solver: two watched literals, first-UIP clause learning,
activity-driven branching with phase saving, and geometric restarts.

Literals are nonzero integers in DIMACS convention (variable v is true as v,
false as -v).
"""


class Solver:
    def __init__(self):
        self.clauses = []
        self.watches = {}      # literal -> clause indices watching it
        self.assign = {}       # var -> bool
        self.level = {}
        self.reason = {}       # var -> clause index (None for decisions/units)
        self.trail = []
        self.lim = []          # trail lengths at decision points
        self.act = {}
        self.phase = {}
        self.inc = 1.0
        self.root_units = []
        self.unsat = False
        self.head = 0
        self.vars = set()

    # -- construction ----------------------------------------------------------

    def add_clause(self, lits):
        out = []
        seen = set()
        for l in lits:
            if l in seen:
                continue
            if -l in seen:
                return  # tautology
            seen.add(l)
            out.append(l)
            v = abs(l)
            if v not in self.vars:
                self.vars.add(v)
                self.act[v] = 0.0
                self.phase[v] = False
        if not out:
            self.unsat = True
            return
        if len(out) == 1:
            self.root_units.append(out[0])
            return
        self._attach(out)

    def _attach(self, clause):
        ci = len(self.clauses)
        self.clauses.append(clause)
        for l in clause[:2]:
            self.watches.setdefault(l, []).append(ci)
        return ci

    # -- assignment ------------------------------------------------------------

    def _val(self, lit):
        v = self.assign.get(abs(lit))
        if v is None:
            return None
        return v if lit > 0 else not v

    def _enqueue(self, lit, reason):
        v = abs(lit)
        if v in self.assign:
            return self.assign[v] == (lit > 0)
        self.assign[v] = lit > 0
        self.level[v] = len(self.lim)
        self.reason[v] = reason
        self.trail.append(lit)
        return True

    def _propagate(self):
        while self.head < len(self.trail):
            lit = self.trail[self.head]
            self.head += 1
            neg = -lit
            pending = self.watches.get(neg, [])
            self.watches[neg] = []
            while pending:
                ci = pending.pop()
                clause = self.clauses[ci]
                if clause[0] == neg:
                    clause[0], clause[1] = clause[1], clause[0]
                first = clause[0]
                if self._val(first) is True:
                    self.watches[neg].append(ci)
                    continue
                moved = False
                for i in range(2, len(clause)):
                    if self._val(clause[i]) is not False:
                        clause[1], clause[i] = clause[i], clause[1]
                        self.watches.setdefault(clause[1], []).append(ci)
                        moved = True
                        break
                if moved:
                    continue
                self.watches[neg].append(ci)
                if self._val(first) is False:
                    self.watches[neg].extend(pending)
                    return ci
                self._enqueue(first, ci)
        return None

    # -- learning --------------------------------------------------------------

    def _bump(self, v):
        self.act[v] = self.act.get(v, 0.0) + self.inc
        if self.act[v] > 1e100:
            for u in self.act:
                self.act[u] *= 1e-100
            self.inc *= 1e-100

    def _analyze(self, confl):
        dl = len(self.lim)
        learnt = []
        seen = set()
        counter = 0
        pivot = None
        idx = len(self.trail) - 1
        clause = self.clauses[confl]
        while True:
            for q in clause:
                if q == pivot:
                    continue
                v = abs(q)
                if v in seen or self.level[v] == 0:
                    continue
                seen.add(v)
                self._bump(v)
                if self.level[v] == dl:
                    counter += 1
                else:
                    learnt.append(q)
            while abs(self.trail[idx]) not in seen:
                idx -= 1
            pivot = self.trail[idx]
            v = abs(pivot)
            idx -= 1
            seen.discard(v)
            counter -= 1
            if counter == 0:
                asserting = -pivot
                if not learnt:
                    return [asserting], 0
                blevel = max(self.level[abs(q)] for q in learnt)
                # watch the asserting literal and one literal from the
                # backjump level
                learnt.sort(key=lambda q: -self.level[abs(q)])
                return [asserting] + learnt, blevel
            clause = self.clauses[self.reason[v]]

    def _backtrack(self, blevel):
        while len(self.lim) > blevel:
            mark = self.lim.pop()
            while len(self.trail) > mark:
                lit = self.trail.pop()
                v = abs(lit)
                self.phase[v] = self.assign[v]
                del self.assign[v]
                del self.level[v]
                self.reason.pop(v, None)
        self.head = min(self.head, len(self.trail))

    def _decide(self):
        best = None
        for v in self.vars:
            if v not in self.assign:
                if best is None or self.act[v] > self.act[best] or \
                        (self.act[v] == self.act[best] and v < best):
                    best = v
        if best is None:
            return False
        self.lim.append(len(self.trail))
        self._enqueue(best if self.phase[best] else -best, None)
        return True

    # -- main loop -------------------------------------------------------------

    def solve(self):
        if self.unsat:
            return False
        for lit in self.root_units:
            if not self._enqueue(lit, None):
                return False
        restart_budget = 100
        conflicts = 0
        while True:
            confl = self._propagate()
            if confl is not None:
                if not self.lim:
                    return False
                conflicts += 1
                self.inc /= 0.95
                learnt, blevel = self._analyze(confl)
                self._backtrack(blevel)
                if len(learnt) == 1:
                    if not self._enqueue(learnt[0], None):
                        return False
                else:
                    ci = self._attach(learnt)
                    self._enqueue(learnt[0], ci)
                if conflicts >= restart_budget:
                    conflicts = 0
                    restart_budget = int(restart_budget * 1.5)
                    self._backtrack(0)
            else:
                if not self._decide():
                    return True

    def model(self):
        return dict(self.assign)
