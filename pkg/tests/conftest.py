import pytest

from fewintent.corpus import Dataset, IntentLabel, LabeledUtterance


def make_dataset(n_intents=4, per_intent=2, name="toy"):
    """Deterministic toy dataset: intent i utterances mention token w{i}."""
    labels = tuple(IntentLabel(i, f"intent_{i}", f"intent {i}") for i in range(n_intents))
    examples = tuple(
        LabeledUtterance(f"do w{i} thing number {j}", i, domain=f"dom{i % 2}")
        for i in range(n_intents)
        for j in range(per_intent)
    )
    return Dataset(labels, examples, name=name)


@pytest.fixture
def toy_dataset():
    return make_dataset()
