import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from msqkd.protocol import (
    AttackModel,
    Choice,
    Mode,
    ModePolicy,
    ProtocolConfig,
    RoundRecord,
    extract_raw_key,
    read_transcript,
    run_round,
    sampling_stage,
    simulate,
    write_transcript,
)
from msqkd.rng import SAMPLING_STREAM, Stream


def rec(idx, ca, cb, oa, ob, msg, in_sample=False, msg_b=None):
    return RoundRecord(
        index=idx,
        choice_a=Choice.MEASURE_RESEND if ca else Choice.REFLECT,
        choice_b=Choice.MEASURE_RESEND if cb else Choice.REFLECT,
        outcome_a=oa,
        outcome_b=ob,
        msg_to_a=msg,
        msg_to_b=msg if msg_b is None else msg_b,
        in_sample=in_sample,
    )


class TestConfig:
    def test_defaults(self):
        cfg = ProtocolConfig(rounds=10)
        assert cfg.p_m == 0.5
        assert cfg.sample_fraction == 0.1
        assert cfg.noise == (0.0, 0.0)
        assert cfg.mode_policy is ModePolicy.AUTO
        assert not cfg.adversarial

    def test_zero_rounds_allowed(self):
        assert simulate(ProtocolConfig(rounds=0)) == []

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(rounds=-1),
            dict(rounds=1, p_m=0.0),
            dict(rounds=1, p_m=1.0),
            dict(rounds=1, sample_fraction=0.0),
            dict(rounds=1, sample_fraction=1.0),
            dict(rounds=1, noise=(0.6, 0.0)),
            dict(rounds=1, noise=(0.0, -0.1)),
            dict(rounds=1, mode_policy="flip"),
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            ProtocolConfig(**kwargs)

    def test_attack_model_noise_is_adversarial(self):
        cfg = ProtocolConfig(rounds=1, noise=AttackModel.honest())
        assert cfg.adversarial


class TestAttackModel:
    def test_honest_identity_shape(self):
        att = AttackModel.honest()
        assert att.alphas.shape == (4,)
        assert att.eve_vectors.shape == (4, 4, 1)

    def test_honest_with_return_noise_dilates(self):
        att = AttackModel.honest(0.2)
        assert att.eve_vectors.shape == (4, 4, 16)

    def test_isometry_enforced(self):
        att = AttackModel.honest()
        bad = att.eve_vectors.copy()
        bad[0, 0, 0] *= 1.5
        with pytest.raises(ValueError, match="isometry"):
            AttackModel(att.alphas, bad)

    def test_alphas_must_be_unit(self):
        att = AttackModel.honest()
        with pytest.raises(ValueError):
            AttackModel(np.array([1.0, 1.0, 0.0, 0.0]), att.eve_vectors)

    def test_random_models_are_valid(self):
        rng = np.random.default_rng(0)
        for d in (1, 2, 3, 4, 16):
            att = AttackModel.random(d, rng)
            assert att.eve_dim == d

    def test_dimension_cap(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            AttackModel.random(17, rng)

    def test_vector_accessor(self):
        att = AttackModel.honest()
        v = att.vector(0, 0, 0)
        assert v.shape == (1,)
        assert abs(abs(v[0]) - math.sqrt(0.5)) < 1e-12


class TestSimulate:
    def test_deterministic(self):
        cfg = ProtocolConfig(rounds=500, noise=(0.1, 0.2), seed=4)
        assert simulate(cfg) == simulate(cfg)

    def test_worker_count_does_not_change_records(self):
        cfg = ProtocolConfig(rounds=1003, noise=(0.15, 0.1), seed=8)
        assert simulate(cfg, workers=1) == simulate(cfg, workers=4)

    def test_seed_matters(self):
        a = simulate(ProtocolConfig(rounds=200, seed=1))
        b = simulate(ProtocolConfig(rounds=200, seed=2))
        assert a != b

    def test_record_wellformedness(self):
        for r in simulate(ProtocolConfig(rounds=300, noise=(0.3, 0.3), seed=3)):
            measured = r.choice_a is Choice.MEASURE_RESEND
            assert (r.outcome_a is not None) == measured
            assert r.msg_to_a == r.msg_to_b

    def test_run_round_matches_batch(self):
        cfg = ProtocolConfig(rounds=50, noise=(0.2, 0.05), seed=12)
        batch = simulate(cfg)
        for idx in (0, 7, 49):
            assert run_round(cfg, idx) == batch[idx]

    def test_run_round_matches_batch_under_attack(self):
        rng = np.random.default_rng(5)
        cfg = ProtocolConfig(rounds=20, noise=AttackModel.random(2, rng), seed=12)
        batch = simulate(cfg)
        for idx in (0, 13, 19):
            assert run_round(cfg, idx) == batch[idx]

    def test_attack_rounds_simulate(self):
        rng = np.random.default_rng(9)
        cfg = ProtocolConfig(rounds=400, noise=AttackModel.random(4, rng), seed=21)
        records = simulate(cfg, workers=2)
        assert len(records) == 400
        assert any(r.msg_to_a in (2, 3) for r in records)


class TestSamplingStage:
    def _records(self, n, seed=0):
        return simulate(ProtocolConfig(rounds=n, noise=(0.1, 0.1), seed=seed))

    def test_sample_size_is_ceiling(self):
        recs = self._records(37)
        out, abort = sampling_stage(recs, 0.1, Stream(0, SAMPLING_STREAM))
        assert sum(r.in_sample for r in out) == math.ceil(0.1 * 37)
        assert not abort

    def test_only_flags_change(self):
        recs = self._records(50)
        out, _ = sampling_stage(recs, 0.2, Stream(0, SAMPLING_STREAM))
        for before, after in zip(recs, out):
            assert before == after or after.in_sample

    def test_deterministic_in_stream(self):
        recs = self._records(64)
        a, _ = sampling_stage(recs, 0.25, Stream(7, SAMPLING_STREAM))
        b, _ = sampling_stage(recs, 0.25, Stream(7, SAMPLING_STREAM))
        assert a == b

    def test_abort_on_differing_messages(self):
        recs = [rec(0, 1, 1, 0, 0, 1), rec(1, 0, 0, None, None, 0, msg_b=2)]
        _, abort = sampling_stage(recs, 0.5, Stream(0, SAMPLING_STREAM))
        assert abort

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            sampling_stage([], 0.1, Stream(0, SAMPLING_STREAM))

    def test_full_fraction_flags_everything(self):
        recs = self._records(10)
        out, _ = sampling_stage(recs, 1.0, Stream(0, SAMPLING_STREAM))
        assert all(r.in_sample for r in out)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(1, 200), st.floats(0.01, 0.99), st.integers(0, 2**32))
    def test_sample_count_property(self, n, fraction, seed):
        recs = self._records(n, seed=seed % 7)
        out, _ = sampling_stage(recs, fraction, Stream(seed, SAMPLING_STREAM))
        assert sum(r.in_sample for r in out) == math.ceil(fraction * n)


class TestRawKey:
    def test_noflip_uses_bits_as_is(self):
        recs = [
            rec(0, 1, 1, 1, 0, 2),
            rec(1, 1, 1, 0, 0, 0),
            rec(2, 1, 0, 1, None, 1),  # not both measured
            rec(3, 1, 1, 1, 1, 3, in_sample=True),  # disclosed
        ]
        ka, kb = extract_raw_key(recs, Mode.NOFLIP)
        assert (ka, kb) == ("10", "00")

    def test_flip_inverts_bob_on_psi_messages(self):
        recs = [
            rec(0, 1, 1, 1, 0, 2),
            rec(1, 1, 1, 0, 0, 0),
            rec(2, 1, 1, 1, 0, 3),
        ]
        ka, kb = extract_raw_key(recs, Mode.FLIP)
        assert (ka, kb) == ("101", "101")

    def test_empty_when_nothing_qualifies(self):
        recs = [rec(0, 0, 0, None, None, 0)]
        assert extract_raw_key(recs, Mode.NOFLIP) == ("", "")

    def test_noiseless_keys_agree_exactly(self):
        cfg = ProtocolConfig(rounds=2000, seed=5)
        recs, _ = sampling_stage(simulate(cfg), 0.1, Stream(5, SAMPLING_STREAM))
        ka, kb = extract_raw_key(recs, Mode.NOFLIP)
        assert ka == kb
        assert len(ka) > 300


class TestRoundRecord:
    def test_outcome_choice_consistency(self):
        with pytest.raises(ValueError):
            rec(0, 1, 0, None, None, 0)  # measured but no outcome
        with pytest.raises(ValueError):
            rec(0, 0, 0, 1, None, 0)  # outcome without measuring

    def test_message_domain(self):
        with pytest.raises(ValueError):
            rec(0, 0, 0, None, None, 4)


class TestTranscript:
    def test_round_trip(self, tmp_path):
        cfg = ProtocolConfig(rounds=120, noise=(0.2, 0.3), seed=17)
        recs, _ = sampling_stage(simulate(cfg), 0.1, Stream(17, SAMPLING_STREAM))
        path = tmp_path / "t.csv"
        write_transcript(recs, path)
        assert read_transcript(path) == recs

    def test_absent_outcomes_render_as_dash(self, tmp_path):
        path = tmp_path / "t.csv"
        write_transcript([rec(0, 0, 1, None, 1, 2)], path)
        line = path.read_text().strip()
        assert line == "0,R,M,-,1,2,0"

    def test_differing_messages_rejected(self, tmp_path):
        bad = [rec(0, 0, 0, None, None, 0, msg_b=1)]
        with pytest.raises(ValueError):
            write_transcript(bad, tmp_path / "t.csv")

    def test_rerun_is_byte_identical(self, tmp_path):
        cfg = ProtocolConfig(rounds=64, noise=(0.05, 0.05), seed=2)
        recs = simulate(cfg)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_transcript(recs, p1)
        write_transcript(recs, p2)
        assert p1.read_bytes() == p2.read_bytes()
