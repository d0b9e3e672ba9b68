import numpy as np
import pytest

from patchtunnel.arena import Arena, ArenaMisuse, ArenaOverflow
from patchtunnel.planner import MemoryBudget
from patchtunnel.runtime import make_arena


def test_make_arena():
    a = make_arena(MemoryBudget(262_144, 1))
    assert a.capacity_bytes == 262_144 and a.cursor == 0 and a.high_water_bytes == 0


def test_alloc_advances_cursor_by_elem_bytes():
    a = Arena(1000, elem_bytes=4)
    a.alloc((100,))
    assert a.cursor == 400


def test_overflow_leaves_arena_unchanged():
    a = Arena(100, elem_bytes=4)
    a.alloc((20,))
    before = (a.cursor, a.high_water_bytes, len(a.events), len(a.live_blocks))
    with pytest.raises(ArenaOverflow):
        a.alloc((6,))
    assert (a.cursor, a.high_water_bytes, len(a.events), len(a.live_blocks)) == before


def test_exact_fit():
    a = Arena(100, elem_bytes=4)
    a.alloc((25,))
    assert a.cursor == a.capacity_bytes == a.high_water_bytes


def test_stack_discipline():
    a = Arena(64, elem_bytes=1)
    b1 = a.alloc((4,))
    a.alloc((4,))
    with pytest.raises(ArenaMisuse):
        a.free(b1)


def test_high_water_is_max_cursor():
    a = Arena(64, elem_bytes=1)
    x = a.alloc((10,))
    y = a.alloc((20,))
    a.free(y)
    z = a.alloc((5,))
    a.free(z)
    a.free(x)
    assert a.high_water_bytes == 30 and a.cursor == 0
    assert max(e.cursor_after for e in a.events) == 30


def test_blocks_do_not_alias():
    a = Arena(64, elem_bytes=1)
    x = a.alloc((2, 3))
    y = a.alloc((4,))
    x.array[...] = 1.0
    y.array[...] = 2.0
    assert (x.array == 1.0).all() and (y.array == 2.0).all()


def test_sink_moves_data_down():
    a = Arena(64, elem_bytes=2)
    lower = a.stage(np.arange(6.0).reshape(2, 3), tag="in")
    upper = a.stage(np.arange(10.0, 14.0).reshape(2, 2), tag="out")
    moved = a.sink(lower, upper)
    assert moved.offset == 0 and a.cursor == 8 and a.high_water_bytes == 20
    np.testing.assert_array_equal(moved.array, [[10.0, 11.0], [12.0, 13.0]])


def test_sink_requires_adjacent_top_blocks():
    a = Arena(64, elem_bytes=1)
    b0 = a.alloc((2,))
    a.alloc((2,))
    b2 = a.alloc((2,))
    with pytest.raises(ArenaMisuse):
        a.sink(b0, b2)


def test_unwind():
    a = Arena(64, elem_bytes=1)
    a.alloc((2,))
    a.alloc((3,))
    a.alloc((4,))
    a.unwind(1)
    assert a.cursor == 2 and len(a.live_blocks) == 1


@pytest.mark.parametrize("kw", [dict(capacity_bytes=0), dict(capacity_bytes=10, elem_bytes=3)])
def test_invalid_arena(kw):
    with pytest.raises(ValueError):
        Arena(**kw)
