import pytest

from almostconv.convolve import HorizonPolicy

# (expression, horizon) pairs. Signals without periodic or block structure
# need an explicit horizon; 4r scans [-4r, 4r] at dilation r.
CORPUS = [
    ("sin(t)", "auto"),
    ("3+4i", "auto"),
    ("cis(t)", "auto"),
    ("cos(t)*cos(1.41421356*t)", "4r"),
    ("1/(t+i)", "4r"),
    ("cis(-2*t)*ratio(1)", "4r"),
    ("ratio(1)", "4r"),
    ("samples(t0=0, h=0.5, values=[0, 1, -1, 0.5])", "4r"),
    ("1+blocks(intervals=[0,5])", "auto"),
    ("blocks(base=4)", "auto"),
    ("blocks(base=4, mirror=1)+0.5*sin(t)", "auto"),
    ("sign(t)", "4r"),
]

# Signals continuous everywhere (for small-dilation recovery).
CONTINUOUS = [
    "sin(t)",
    "3+4i",
    "cis(t)",
    "cos(t)*cos(1.41421356*t)",
    "1/(t+i)",
    "cis(-2*t)*ratio(1)",
    "ratio(1)",
    "samples(t0=0, h=0.5, values=[0, 1, -1, 0.5])",
    "0.5*sin(3*t)+cos(t/2)",
]


@pytest.fixture(scope="session")
def corpus():
    return [(s, HorizonPolicy.parse(h)) for s, h in CORPUS]
