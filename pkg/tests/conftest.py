import sys
from pathlib import Path

import pytest

from sdlocal.model import Lifeline, MessageDecl, Msg, Scenario, Seq, opt

sys.path.insert(0, str(Path(__file__).parent))


def _scenario(name, lifelines, messages, body=None):
    decls = [MessageDecl(n, a, b) for n, a, b in messages]
    return Scenario(name, [Lifeline(l) for l in lifelines], decls,
                    Seq(body if body is not None else [Msg(n) for n, _, _ in messages]))


def build_empty():
    return Scenario("empty")


def build_single():
    return _scenario("single", ["A", "B"], [("m", "A", "B")])


def build_pay():
    return _scenario("pay", ["L1", "L2", "L3"], [("m1", "L1", "L2"), ("m2", "L1", "L3"), ("m3", "L2", "L3")])


def build_notify():
    return _scenario("notify", ["L1", "L2"], [("m1", "L1", "L2"), ("m2", "L2", "L1")],
                     [Msg("m1"), opt(Msg("m2"))])


def build_pay_six():
    # Variant of the payment race where L1 forwards m2 only after hearing from L2.
    return _scenario("pay_six", ["L1", "L2", "L3"], [("m1", "L2", "L1"), ("m2", "L1", "L3"), ("m3", "L2", "L3")])


PAY_TEXT = """scenario pay
lifeline L1
lifeline L2
lifeline L3
m1: L1 -> L2
m2: L1 -> L3
m3: L2 -> L3
"""

NOTIFY_TEXT = """scenario notify
lifeline L1
lifeline L2
m1: L1 -> L2
opt {
  m2: L2 -> L1
}
"""

SINGLE_TEXT = """scenario single
lifeline A
lifeline B
m: A -> B
"""

EMPTY_TEXT = "scenario empty\n"


@pytest.fixture
def fix_empty():
    return build_empty()


@pytest.fixture
def fix_single():
    return build_single()


@pytest.fixture
def fix_pay():
    return build_pay()


@pytest.fixture
def fix_notify():
    return build_notify()


@pytest.fixture
def fix_pay_six():
    return build_pay_six()


@pytest.fixture
def fixture_files(tmp_path):
    paths = {}
    for name, text in (("empty", EMPTY_TEXT), ("single", SINGLE_TEXT), ("pay", PAY_TEXT), ("notify", NOTIFY_TEXT)):
        p = tmp_path / f"fix-{name}.dco"
        p.write_text(text)
        paths[name] = p
    return paths
