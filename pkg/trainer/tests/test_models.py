"""Cross-engine contract: exported weights reproduce torch logits in the
inference engine."""

import numpy as np
import pytest
import torch

import splitwire as sw
from splitwire_trainer.config import TrainConfig
from splitwire_trainer.export import export_weights
from splitwire_trainer.models import NormalizeScale, SplitClassifier, build_model


def config_for(split, n_c=256, stages=2, model="resnet18", snr=None):
    return TrainConfig(dataset="cifar10", model=model, split=split, n_c=n_c,
                       decompress_stages=stages, snr_db=snr, seed=3, num_workers=0)


@pytest.mark.parametrize("split,n_c,stages", [("SP-2", 256, 2), ("SP-4", 64, 2), ("SP-2", 1024, 1), ("SP-5", 128, 2)])
def test_exported_split_model_matches_engine_logits(split, n_c, stages):
    torch.manual_seed(11)
    model, description = build_model(config_for(split, n_c, stages))
    model.eval()
    store = sw.load_weights(export_weights(model))

    rng = np.random.Generator(np.random.Philox(5))
    worst = 0.0
    for _ in range(10):
        x = rng.random((3, 32, 32), dtype=np.float32)
        with torch.no_grad():
            torch_logits = model(torch.from_numpy(x).unsqueeze(0)).numpy().reshape(-1)
        z = sw.run_graph(description.encoder, store, x)
        engine_logits = sw.run_graph(description.decoder, store, z.reshape(-1, 1, 1)).reshape(-1)
        worst = max(worst, float(np.abs(torch_logits - engine_logits).max()))
    assert worst <= 1e-3, worst


def test_exported_vanilla_model_matches_engine_on_100_inputs():
    torch.manual_seed(4)
    model, graph = build_model(config_for(None))
    model.eval()
    store = sw.load_weights(export_weights(model))

    rng = np.random.Generator(np.random.Philox(9))
    batch = rng.random((100, 3, 32, 32), dtype=np.float32)
    with torch.no_grad():
        torch_logits = model(torch.from_numpy(batch)).numpy()
    worst = 0.0
    for i in range(100):
        engine_logits = sw.run_graph(graph, store, batch[i]).reshape(-1)
        worst = max(worst, float(np.abs(torch_logits[i] - engine_logits).max()))
    assert worst <= 1e-3, worst


def test_normalize_scale_matches_channel_contract():
    layer = NormalizeScale()
    z = torch.randn(4, 64, 1, 1)
    out = layer(z).flatten(1)
    norms = out.norm(dim=1)
    assert torch.allclose(norms, torch.full((4,), 8.0), atol=1e-4)


def test_channel_noise_statistics():
    torch.manual_seed(0)
    model = SplitClassifier.__new__(SplitClassifier)  # only need the channel
    from splitwire_trainer.models import GaussianChannel

    channel = GaussianChannel(sigma=0.5)
    z = torch.zeros(64, 256, 1, 1)
    noisy = channel(z)
    assert float(noisy.var()) == pytest.approx(0.25, rel=0.1)
    assert GaussianChannel(0.0)(z).equal(z)


def test_degenerate_splits_rejected():
    with pytest.raises(ValueError, match="degenerate"):
        build_model(config_for("SP-0"))
    with pytest.raises(ValueError, match="degenerate"):
        build_model(config_for("SP-6"))


def test_torch_and_engine_agree_through_noiseless_channel():
    """Full split pipeline parity at sigma=0 (labels, not just logits)."""
    torch.manual_seed(21)
    config = config_for("SP-3", n_c=64, snr=None)
    model, description = build_model(config)
    model.eval()
    store = sw.load_weights(export_weights(model))
    from splitwire.pipeline import run_local

    rng = np.random.Generator(np.random.Philox(31))
    for _ in range(5):
        x = rng.random((3, 32, 32), dtype=np.float32)
        with torch.no_grad():
            torch_label = int(model(torch.from_numpy(x).unsqueeze(0)).argmax())
        engine_label = run_local(description, store, x, snr_db=float("inf"), seed=1).label
        assert torch_label == engine_label
