"""Rules extracted from a trained network on iris, step by step."""

import numpy as np

from rexkit import discretize, network, rex
from rexkit.dataset import input_matrix, load_benchmark, normalize

iris = load_benchmark("iris")
scaled = normalize(iris)
X, names = input_matrix(scaled)

# start from one hidden node; nodes are added whenever the error stalls
net = network.init_network(X.shape[1], iris.n_classes, seed=0)
report = network.train(net, scaled)
print(report)

net = network.prune(net, scaled)
print("active connections:", int(net.mask_ih.sum() + net.mask_ho.sum()))
print("inputs cut off:", [names[i] for i in network.removed_inputs(net)])

# hidden activations -> a few discrete levels that keep every prediction
table = discretize.select_delta(net, scaled)
print(f"delta {table.delta}: clusters per node {[len(c) for c in table.clusters]}")

hidden_data = discretize.discretize_dataset(net, scaled, table)
hidden_rules = rex.run_rex(hidden_data)
print(hidden_rules.render())

# the same pipeline, with every cluster explained in terms of the inputs
from rexkit.pipeline import PipelineConfig, run  # noqa: E402

rules, report, _ = run(iris, PipelineConfig(mode="reann"))
print()
print(rules.render())
print(f"accuracy {report.train_accuracy:.2%}, agreement with the network "
      f"{report.fidelity_to_network:.2%}")
print("network accuracy", np.round(network.accuracy(net, scaled), 4))
