"""This is an example of using the toolkit as a library.

It trains a compact dense network on a Boolean DNF task, expands it with
clause-aware and random splits at the same number of non-zero weights,
continues training and prints accuracy next to the interference metrics.
"""

from fpe_toolkit import *

SEED = 0
HIDDEN = 8
ALPHA = 2


def main() -> None:
    spec = DnfSpec(m=32, k=4)
    train_data, test_data = generate_train_test(2000, 1000, spec, SEED)
    train_set, test_set = train_data.to_labeled(), test_data.to_labeled()

    cfg = TrainConfig(learning_rate=1e-2, batch_size=100, epochs=50, trials=1, seed=SEED)
    dense = init_model([spec.m, HIDDEN, 1], SEED)
    dense, _ = train(dense, train_set, cfg)
    _report("dense (pretrained)", dense, test_set)

    for kind in (PartitionKind.CLAUSE_AWARE, PartitionKind.RANDOM):
        plan = ExpansionPlan(ALPHA, PartitionStrategy(kind, seed=SEED, clause_size=spec.k))
        expanded = fpe_expand_model(dense, plan)
        expanded, _ = train(expanded, train_set, cfg)
        _report(kind.value, expanded, test_set)

    # Continue the dense model for the same number of epochs as the expanded ones.
    dense, _ = train(dense, train_set, cfg)
    _report("dense", dense, test_set)

    print()
    params = TheoryParams(m=spec.m, k=spec.k, num_clauses=spec.num_clauses, r=HIDDEN, alpha=ALPHA)
    for row in theory_table(params):
        print(f"{row.quantity:<36} {row.exact:.6g}")


def _report(name: str, model: MlpModel, test_set: LabeledMatrixDataset) -> None:
    accuracy = evaluate(model, test_set)
    report = metrics_report(model, accuracy, clause_size=4)
    print(
        f"{name:<20} accuracy {accuracy:.3f}  nnz {report.nnz:4d}  "
        f"capacity {report.total_capacity:.3f}  cosine {report.mean_cosine:.3f}"
    )


if __name__ == "__main__":
    main()
