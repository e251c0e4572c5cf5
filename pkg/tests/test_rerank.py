import json
import math
import random
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from hyqa.corpus import Candidate, TABULAR, TEXTUAL
from hyqa.remote import ProtocolError, TransportError
from hyqa.rerank import (
    LOSS_EPS,
    NEGATIVE,
    POSITIVE,
    LexicalScorer,
    RemoteScorer,
    ScoredCandidate,
    build_rerank_input,
    label_candidates,
    lexical_score,
    reranker_loss,
    sample_training_batch,
    score_candidates,
    select_top_joint,
)


def cand(cid="c1", kind=TEXTUAL, title="T", content="C"):
    return Candidate(id=cid, kind=kind, title=title, content=content)


class TestRerankInput:
    def test_marker_layout(self):
        assert build_rerank_input("who?", cand()) == "[question] who? [title] T [content] C"

    def test_flattened_table_embedded_verbatim(self):
        flattened = "[header] A ; B [row] 1 ; 2"
        text = build_rerank_input("q", cand(kind=TABULAR, title="t_1", content=flattened))
        assert text.endswith(f"[content] {flattened}")

    def test_empty_title_keeps_marker(self):
        assert "[title]  [content]" in build_rerank_input("q", cand(title=""))


class TestLoss:
    def test_perfect_positive_is_near_zero(self):
        assert reranker_loss([1.0 - LOSS_EPS], [POSITIVE]) == pytest.approx(0.0, abs=1e-9)

    def test_half_half_is_two_ln_two(self):
        assert reranker_loss([0.5, 0.5], [POSITIVE, NEGATIVE]) == pytest.approx(
            2 * math.log(2), abs=1e-9
        )

    def test_extra_negative_adds_ln_two(self):
        base = reranker_loss([0.5, 0.5], [POSITIVE, NEGATIVE])
        more = reranker_loss([0.5, 0.5, 0.5], [POSITIVE, NEGATIVE, NEGATIVE])
        assert more - base == pytest.approx(math.log(2), abs=1e-12)

    def test_boundary_scores_clamped_finite(self):
        assert math.isfinite(reranker_loss([0.0], [POSITIVE]))
        assert math.isfinite(reranker_loss([1.0], [NEGATIVE]))

    def test_nonnegative_and_zero_only_at_optimum(self):
        rng = random.Random(13)
        for _ in range(100):
            n = rng.randint(1, 8)
            labels = [rng.choice([POSITIVE, NEGATIVE]) for _ in range(n)]
            scores = [rng.uniform(0.01, 0.99) for _ in range(n)]
            assert reranker_loss(scores, labels) > 0.0
        optimum = reranker_loss(
            [1.0 - LOSS_EPS, LOSS_EPS], [POSITIVE, NEGATIVE]
        )
        assert optimum == pytest.approx(0.0, abs=1e-9)

    def test_raising_a_positive_never_increases_loss(self):
        rng = random.Random(7)
        for _ in range(100):
            n = rng.randint(2, 10)
            labels = [POSITIVE] + [rng.choice([POSITIVE, NEGATIVE]) for _ in range(n - 1)]
            scores = [rng.uniform(0.05, 0.9) for _ in range(n)]
            bumped = list(scores)
            bumped[0] = min(1.0, bumped[0] + rng.uniform(0.0, 0.1))
            assert reranker_loss(bumped, labels) <= reranker_loss(scores, labels) + 1e-12

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            reranker_loss([0.5], [POSITIVE, NEGATIVE])


class TestLabeling:
    def test_case_insensitive_containment(self):
        labeled = label_candidates(
            [cand(content="He joined Texas A&M in 2012")], ["texas a&m"]
        )
        assert labeled[0][1] == POSITIVE

    def test_absent_answer_is_negative(self):
        assert label_candidates([cand(content="nothing here")], ["berlin"])[0][1] == NEGATIVE

    def test_any_gold_alternative_suffices(self):
        labeled = label_candidates([cand(content="the capital is Berlin")], ["munich", "berlin"])
        assert labeled[0][1] == POSITIVE


class TestSampling:
    def _labeled(self, n_pos, n_neg):
        pool = [(cand(cid=f"p{i}"), POSITIVE) for i in range(n_pos)]
        pool += [(cand(cid=f"n{i}"), NEGATIVE) for i in range(n_neg)]
        return pool

    def test_default_batch_shape(self):
        batch = sample_training_batch("q", self._labeled(1, 100), seed=1)
        assert batch.positives == ["p0"]
        assert len(batch.negatives) == 63
        assert len(set(batch.negatives)) == 63

    def test_no_positive_skips(self):
        assert sample_training_batch("q", self._labeled(0, 50)) is None

    def test_small_negative_pool_used_whole(self):
        batch = sample_training_batch("q", self._labeled(1, 10), seed=3)
        assert sorted(batch.negatives) == [f"n{i}" for i in range(10)]

    def test_seed_reproducible(self):
        a = sample_training_batch("q", self._labeled(5, 100), seed=42)
        b = sample_training_batch("q", self._labeled(5, 100), seed=42)
        assert a == b

    def test_negative_sampling_roughly_uniform(self):
        # chi-squared over 100 cells; 148.2 is the 0.999 quantile at 99 dof.
        pool = self._labeled(1, 100)
        counts = {f"n{i}": 0 for i in range(100)}
        trials = 400
        for seed in range(trials):
            for cid in sample_training_batch("q", pool, seed=seed).negatives:
                counts[cid] += 1
        expected = trials * 63 / 100
        chi2 = sum((got - expected) ** 2 / expected for got in counts.values())
        assert chi2 < 148.2


class TestScoring:
    def test_lexical_full_and_partial_overlap(self):
        assert lexical_score("a b", cand(title="", content="a b c")) == 1.0
        assert lexical_score("a b", cand(title="", content="a")) == 0.5
        assert lexical_score("a b", cand(title="", content="x")) == 0.0

    def test_empty_question_scores_zero(self):
        assert lexical_score("", cand()) == 0.0

    def test_score_candidates_preserves_order(self):
        cands = [cand(cid="a", content="red fish"), cand(cid="b", content="blue fish")]
        scored = score_candidates("blue fish", cands, LexicalScorer())
        assert [s.candidate_id for s in scored] == ["a", "b"]
        assert scored[0].score == 0.5 and scored[1].score == 1.0


class TestSelectTopJoint:
    def sc(self, cid, kind, score):
        return ScoredCandidate(candidate_id=cid, kind=kind, score=score)

    def test_fewer_than_n_returns_all_sorted(self):
        textual = [self.sc(f"t{i}", TEXTUAL, i / 100) for i in range(30)]
        tabular = [self.sc(f"b{i}", TABULAR, i / 200) for i in range(10)]
        out = select_top_joint(textual, tabular, n=50)
        assert len(out) == 40
        assert all(out[i].score >= out[i + 1].score for i in range(len(out) - 1))

    def test_tabular_can_take_rank_one(self):
        textual = [self.sc("t1", TEXTUAL, 0.4)]
        tabular = [self.sc("b1", TABULAR, 0.9)]
        assert select_top_joint(textual, tabular, n=50)[0].candidate_id == "b1"

    def test_equal_scores_textual_first(self):
        textual = [self.sc("t1", TEXTUAL, 0.5)]
        tabular = [self.sc("b1", TABULAR, 0.5)]
        assert [c.candidate_id for c in select_top_joint(textual, tabular)] == ["t1", "b1"]

    def test_matches_sort_oracle_on_random_pools(self):
        rng = random.Random(17)
        for _ in range(30):
            textual = [self.sc(f"t{i}", TEXTUAL, rng.choice([0.1, 0.5, 0.9, rng.random()]))
                       for i in range(rng.randint(0, 60))]
            tabular = [self.sc(f"b{i}", TABULAR, rng.choice([0.1, 0.5, 0.9, rng.random()]))
                       for i in range(rng.randint(0, 60))]
            n = rng.randint(1, 50)
            everything = sorted(
                textual + tabular, key=lambda c: (-c.score, c.kind != TEXTUAL, c.candidate_id)
            )
            assert select_top_joint(textual, tabular, n=n) == everything[:n]


class _EchoHandler(BaseHTTPRequestHandler):
    scores = [0.9, 0.1]

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        payload = {"scores": self.scores[: len(body["pairs"])]}
        data = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture()
def echo_server():
    server = HTTPServer(("127.0.0.1", 0), _EchoHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


class TestRemoteScorer:
    def test_echo_scores_passed_through(self, echo_server):
        scored = score_candidates(
            "q", [cand(cid="a"), cand(cid="b")], RemoteScorer(echo_server)
        )
        assert [s.score for s in scored] == [0.9, 0.1]

    def test_length_mismatch_is_protocol_error(self, echo_server):
        with pytest.raises(ProtocolError):
            RemoteScorer(echo_server).score("q", [cand(cid=f"c{i}") for i in range(5)])

    def test_unreachable_endpoint_is_transport_error(self):
        scorer = RemoteScorer("http://127.0.0.1:1", timeout=0.2)
        with pytest.raises(TransportError):
            scorer.score("q", [cand()])
