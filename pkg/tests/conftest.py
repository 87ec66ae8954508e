from datetime import datetime, timezone

import numpy as np
import pytest

import alertpredict as ap


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Touch every compiled kernel once so JIT time never lands in a timed test."""
    gen = ap.make_peaked_hmm(2, 3, 0.9)
    seq = ap.sample_hmm(gen, 50, seed=0)
    model, _ = ap.baum_welch(ap.init_random(2, 3, 0), seq[:30], max_iter=3)
    ap.evaluate(model, seq[30:], seq[:30], 2)
    ap.evaluate(model, seq[30:], seq[:30], 2, aggregate=True)
    ap.evaluate(model, seq[30:], seq[:30], 2, window=10)
    ap.viterbi(model, seq)
    ap.log_likelihood(model, seq)
    ap.predict_next(model, seq)
    ap.posterior_predict(model, seq)


def _ts(minute: int, second: int = 0) -> datetime:
    return datetime(2000, 4, 16, 21, minute, second, tzinfo=timezone.utc)


# The five sample alerts used throughout: src, dst, numeric signature, category.
SAMPLE_ROWS = [
    ("172.16.112.100", "172.16.112.20", "650", "attempted-recon"),
    ("172.16.112.50", "172.16.113.169", "506", "sdf"),
    ("172.16.116.201", "206.83.105.134", "36489", "trojan-activity"),
    ("207.25.71.186", "172.16.117.132", "684", "unknown"),
    ("209.87.178.183", "192.168.5.122", "41297", "web-application-attack"),
]


@pytest.fixture
def sample_alerts() -> ap.AlertLog:
    alerts = [
        ap.Alert(timestamp=_ts(i), src_ip=src, dst_ip=dst, signature=sig, category=cat)
        for i, (src, dst, sig, cat) in enumerate(SAMPLE_ROWS)
    ]
    return ap.AlertLog(tuple(alerts))


@pytest.fixture
def two_state_model() -> ap.Hmm:
    """Small two-state model whose expectations are all hand-checkable."""
    return ap.Hmm(
        trans=np.array([[0.7, 0.3], [0.4, 0.6]]),
        emit=np.array([[0.9, 0.1], [0.2, 0.8]]),
        init=np.array([0.6, 0.4]),
    )


@pytest.fixture
def obs_010() -> np.ndarray:
    return np.array([0, 1, 0], dtype=np.int64)
