import math

import pytest

import jmee

SMALL = dict(word_dim=8, pos_dim=4, position_dim=4, entity_dim=4, lstm_hidden=6, gcn_hidden=6,
             attention_hidden=6, transform_hidden=6)


def test_labels():
    assert len(jmee.subtypes()) == 33
    assert len(jmee.roles()) == 37
    assert "Die" in jmee.subtypes()


def test_generate_is_deterministic():
    a = jmee.generate(3, 20)
    assert a == jmee.generate(3, 20)
    assert len(a) == 20
    assert {"tokens", "entities", "events"} <= set(a[0])


def test_gold_scores_perfectly():
    corpus = jmee.generate(4, 30)
    report = jmee.score(corpus, corpus)
    assert all(stage["f1"] == 1.0 for stage in report.values())
    single, multiple = jmee.score_split(corpus, corpus)
    assert single["trigger_classification"]["gold"] + multiple["trigger_classification"]["gold"] == \
        report["trigger_classification"]["gold"]


def test_cooccurrence_rows():
    prob, support = jmee.cooccurrence(jmee.generate(5, 500))
    assert len(prob) == 33
    for a, row in enumerate(prob):
        if support[a]:
            assert row[a] == 1.0
            assert all(0.0 <= p <= 1.0 for p in row)


def test_train_predict_save_load(tmp_path):
    corpus = jmee.generate(6, 12)
    model = jmee.Model(corpus, **SMALL)
    trained, history, best = jmee.train(model, corpus, corpus, epochs=2, max_len=50)
    assert len(history) == 2
    assert 0 <= best <= 2
    p = trained.predict(corpus[0])
    assert len(p["trigger_tags"]) == len(corpus[0]["tokens"])
    assert math.isclose(sum(p["attention"]), 1.0, abs_tol=1e-9)

    path = tmp_path / "model.ckpt"
    trained.save(path)
    again = jmee.Model.load(path)
    assert again.parameter_count == trained.parameter_count
    assert again.predict(corpus[0]) == p


def test_bad_input_raises():
    with pytest.raises(jmee.CorpusError):
        jmee.score(['{"tokens": 3}'], ['{"tokens": 3}'])
    with pytest.raises(ValueError):
        jmee.Model([], word_dim=0)


def test_selfcheck_passes():
    results = jmee.selfcheck()
    assert results
    assert all(passed for _, passed, _ in results), [r for r in results if not r[1]]
