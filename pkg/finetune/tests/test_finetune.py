"""Property-based acceptance for the desk-scale LoRA harness."""

import json
import random

import pytest
import torch

from course_finetune.config import (
    ALPHA_BOUNDS,
    DROPOUT_CHOICES,
    LEARNING_RATE_BOUNDS,
    RANK_BOUNDS,
    TARGET_MODULE_NAMES,
    FinetuneConfig,
    load_preset,
)
from course_finetune.data import (
    ChatTokenizer,
    EmptyTrainingSet,
    build_tokenizer_for_pairs,
    chat_messages,
    prepare_chat_dataset,
    read_qa_pairs,
)
from course_finetune.hpo import SearchSpace, hpo_search, sample_config, validation_objective
from course_finetune.lora import (
    LoRALinear,
    apply_lora,
    base_state_bytes,
    save_adapter,
    trainable_fraction,
)
from course_finetune.model import ModelSize, build_model
from course_finetune.train import DivergedLoss, evaluate_loss, train

SMALL = ModelSize(
    vocab_size=512, d_model=64, n_heads=2, d_ff=128, n_layers=1, max_positions=128
)

WORDS = (
    "stiffness matrix weak form element basis node assembly boundary dirichlet "
    "neumann quadrature jacobian shape function gradient residual solver mesh"
).split()


def toy_pairs(n, seed=0, split="train"):
    rng = random.Random(seed)
    pairs = []
    for i in range(n):
        question = f"What is the role of {' '.join(rng.choices(WORDS, k=6))} in problem {i}?"
        answer = f"The role is explained by {' '.join(rng.choices(WORDS, k=20))} for case {i}."
        pairs.append({"question": question, "answer": answer, "split": split})
    return pairs


@pytest.fixture(scope="module")
def smoke_run():
    """One full 50-pair training run with the published-best preset,
    shared by the acceptance assertions below."""
    pairs = toy_pairs(50)
    tokenizer = build_tokenizer_for_pairs(pairs)
    dataset = prepare_chat_dataset(pairs, tokenizer)
    config = load_preset("published-best", seed=1)

    torch.manual_seed(config.seed)
    probe = build_model(seed=config.seed)
    apply_lora(probe, config)
    before = base_state_bytes(probe)

    result = train(config, dataset)
    return {"result": result, "before": before, "config": config, "dataset": dataset}


class TestAcceptance:
    def test_trainable_fraction_below_five_percent(self, smoke_run):
        fraction = smoke_run["result"].trainable_fraction
        assert fraction < 0.05, f"trainable fraction {fraction:.2%}"
        print(f"ACCEPTANCE PASS: trainable-parameter fraction {fraction:.2%} < 5%")

    def test_base_weights_frozen_bit_identical(self, smoke_run):
        after = base_state_bytes(smoke_run["result"].model)
        before = smoke_run["before"]
        assert set(after) == set(before)
        for name in before:
            assert after[name] == before[name], f"{name} changed during training"
        print("ACCEPTANCE PASS: base weights bit-identical after training")

    def test_loss_strictly_decreases_epoch_over_epoch(self, smoke_run):
        losses = smoke_run["result"].epoch_losses
        assert len(losses) == smoke_run["config"].epochs + 1
        for earlier, later in zip(losses, losses[1:]):
            assert later < earlier, f"loss did not decrease: {losses}"
        print(f"ACCEPTANCE PASS: loss strictly decreases {losses[0]:.4f} -> {losses[-1]:.4f}")

    def test_hundred_samples_respect_bounds(self):
        rng = random.Random(99)
        space = SearchSpace()
        for _ in range(100):
            config = sample_config(space, rng)
            assert RANK_BOUNDS[0] <= config.lora_rank <= RANK_BOUNDS[1]
            assert ALPHA_BOUNDS[0] <= config.lora_alpha <= ALPHA_BOUNDS[1]
            assert config.lora_dropout in DROPOUT_CHOICES
            assert LEARNING_RATE_BOUNDS[0] <= config.learning_rate <= LEARNING_RATE_BOUNDS[1]
            assert set(config.target_modules) <= set(TARGET_MODULE_NAMES)
            assert config.epochs == 5
            assert config.grad_accum == 2
            assert config.warmup_steps == 100
            assert config.max_token_length == 700
        print("ACCEPTANCE PASS: 100 sampled configs respect the search-space bounds")


class TestConfig:
    def test_published_preset_loads(self):
        config = load_preset("published-best")
        assert (config.lora_rank, config.lora_alpha) == (45, 65)
        assert config.lora_dropout == 0.05
        assert config.learning_rate == 5e-5

    def test_bounds_enforced(self):
        with pytest.raises(ValueError):
            FinetuneConfig(lora_rank=7)
        with pytest.raises(ValueError):
            FinetuneConfig(lora_rank=65)
        with pytest.raises(ValueError):
            FinetuneConfig(lora_alpha=129)
        with pytest.raises(ValueError):
            FinetuneConfig(lora_dropout=0.2)
        with pytest.raises(ValueError):
            FinetuneConfig(learning_rate=2e-3)
        with pytest.raises(ValueError):
            FinetuneConfig(target_modules=("q", "bogus"))

    def test_unknown_preset(self):
        with pytest.raises(KeyError):
            load_preset("nonexistent")


class TestDataset:
    def test_single_pair_has_three_roles(self):
        pairs = toy_pairs(1)
        messages = chat_messages(pairs[0])
        assert [m["role"] for m in messages] == ["system", "user", "assistant"]
        tokenizer = build_tokenizer_for_pairs(pairs)
        dataset = prepare_chat_dataset(pairs, tokenizer)
        assert len(dataset) == 1

    def test_overlength_example_truncated(self):
        pair = {
            "question": "q",
            "answer": " ".join(f"w{i}" for i in range(2000)),
            "split": "train",
        }
        tokenizer = build_tokenizer_for_pairs([pair])
        dataset = prepare_chat_dataset([pair], tokenizer, max_token_length=700)
        assert len(dataset.examples[0].input_ids) == 700

    def test_test_tagged_pairs_rejected(self):
        pairs = toy_pairs(2, split="test")
        tokenizer = build_tokenizer_for_pairs(pairs)
        with pytest.raises(ValueError):
            prepare_chat_dataset(pairs, tokenizer)

    def test_empty_training_set(self):
        with pytest.raises(EmptyTrainingSet):
            prepare_chat_dataset([], ChatTokenizer.train(["x"]))

    def test_mask_covers_only_assistant_tokens(self):
        pairs = [{"question": "alpha beta", "answer": "gamma delta", "split": "train"}]
        tokenizer = build_tokenizer_for_pairs(pairs)
        dataset = prepare_chat_dataset(pairs, tokenizer)
        example = dataset.examples[0]
        masked = sum(example.label_mask)
        assert masked == 3  # two answer words + end-of-turn marker

    def test_read_qa_pairs(self, tmp_path):
        path = tmp_path / "pairs.jsonl"
        path.write_text(json.dumps({"question": "q", "answer": "a", "split": "train"}) + "\n")
        assert read_qa_pairs(path) == [{"question": "q", "answer": "a", "split": "train"}]


class TestLoRA:
    def test_wrapped_module_initially_identity(self):
        torch.manual_seed(0)
        base = torch.nn.Linear(8, 8, bias=False)
        wrapped = LoRALinear(base, rank=4, alpha=8, dropout=0.05)
        wrapped.eval()
        x = torch.randn(3, 8)
        assert torch.allclose(wrapped(x), base(x))

    def test_only_adapters_trainable(self):
        model = build_model(SMALL, seed=0)
        apply_lora(model, FinetuneConfig(target_modules=("q", "v")))
        for name, param in model.named_parameters():
            if "lora_a" in name or "lora_b" in name:
                assert param.requires_grad
            else:
                assert not param.requires_grad

    def test_save_adapter_writes_weights_and_config(self, tmp_path):
        model = build_model(SMALL, seed=0)
        config = FinetuneConfig()
        apply_lora(model, config)
        out = save_adapter(model, config, tmp_path / "adapter")
        assert (out / "adapter.pt").exists()
        stored = json.loads((out / "adapter_config.json").read_text())
        assert stored["lora_rank"] == config.lora_rank
        weights = torch.load(out / "adapter.pt")
        assert all("lora" in name for name in weights)

    def test_bfloat16_flag_casts_base(self):
        model = build_model(SMALL, seed=0, bfloat16=True)
        assert model.tok_embed.weight.dtype == torch.bfloat16


class TestTraining:
    def small_dataset(self, n=8):
        pairs = toy_pairs(n)
        tokenizer = build_tokenizer_for_pairs(pairs)
        return prepare_chat_dataset(pairs, tokenizer)

    def test_zero_lr_is_noop(self):
        dataset = self.small_dataset()
        config = FinetuneConfig(learning_rate=0.0, lora_dropout=0.05, seed=3)
        result = train(config, dataset, SMALL)
        assert result.final_loss == pytest.approx(result.initial_loss, abs=1e-6)

    def test_deterministic_loss_curve_under_seed(self):
        dataset = self.small_dataset()
        config = FinetuneConfig(learning_rate=1e-3, seed=11)
        first = train(config, dataset, SMALL)
        second = train(config, dataset, SMALL)
        for a, b in zip(first.epoch_losses, second.epoch_losses):
            assert a == pytest.approx(b, abs=1e-4)

    def test_diverged_loss_detected(self, monkeypatch):
        from course_finetune import train as train_module

        dataset = self.small_dataset(4)
        measured = iter([1.0, 1.3, 1.6, 1.9, 2.0, 2.5])
        monkeypatch.setattr(
            train_module, "evaluate_loss", lambda *args, **kwargs: next(measured)
        )
        config = FinetuneConfig(learning_rate=1e-5, seed=5)
        with pytest.raises(DivergedLoss):
            train_module.train(config, dataset, SMALL)


class TestHpo:
    def test_three_trials_all_valid(self, tmp_path):
        calls = []

        def objective(config):
            calls.append(config)
            return float(config.lora_rank)

        result = hpo_search(
            SearchSpace(), 3, objective, seed=4, log_path=tmp_path / "trials.json"
        )
        assert len(calls) == 3
        assert len(result.trials) == 3
        assert result.best.loss <= min(t.loss for t in result.trials)
        log = json.loads((tmp_path / "trials.json").read_text())
        assert log["best"]["loss"] == result.best.loss
        assert len(log["trials"]) == 3

    def test_real_validation_objective(self):
        pairs = toy_pairs(10)
        tokenizer = build_tokenizer_for_pairs(pairs)
        space = SearchSpace(epochs=5)
        objective = validation_objective(pairs, tokenizer, SMALL, seed=2)
        result = hpo_search(space, 2, objective, seed=2)
        assert all(t.loss > 0 for t in result.trials)
        assert result.best.loss == min(t.loss for t in result.trials)

    def test_n_trials_validation(self):
        with pytest.raises(ValueError):
            hpo_search(SearchSpace(), 0, lambda c: 0.0)
