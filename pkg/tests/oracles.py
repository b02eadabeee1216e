"""Independent oracles shared by the unit and acceptance tests."""


def treiber_finals(values):
    """Final stacks over all interleavings of one push per thread."""
    # thread state: (pc, snap); pc 0 read-top, 1 cas, 2 done
    finals = set()

    def go(stack, threads):
        if all(pc == 2 for pc, _ in threads):
            finals.add(stack)
            return
        for i, (pc, snap) in enumerate(threads):
            if pc == 2:
                continue
            nxt = list(threads)
            if pc == 0:
                nxt[i] = (1, stack)
                go(stack, tuple(nxt))
            elif stack == snap:
                nxt[i] = (2, None)
                go((values[i],) + snap, tuple(nxt))
            else:
                nxt[i] = (0, None)
                go(stack, tuple(nxt))

    go((), tuple((0, None) for _ in values))
    return finals
