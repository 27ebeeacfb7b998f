"""Train a few differently-seeded models, combine them by averaging class
probabilities, and export the refined sentence representations as TSV.

Run:  python demos/05_ensemble_and_export.py
"""

import numpy as np

from nliattn import synth
from nliattn.data import CharVocabulary, Vocabulary, random_embeddings
from nliattn.encoder import EncoderConfig
from nliattn.evaluation import ensemble_evaluate, evaluate, export_representations
from nliattn.model import ModelConfig, NLIModel
from nliattn.training import TrainConfig, train

train_examples = synth.synthetic_examples(300, seed=21)
dev_examples = synth.synthetic_examples(90, seed=22)
vocab = Vocabulary.from_examples(train_examples, dim=16)
chars = CharVocabulary.from_examples(train_examples, dim=3)

config = ModelConfig(
    encoder=EncoderConfig(use_chars=False, word_dim=16, char_dim=3, char_hidden=3,
                          hidden_per_dir=6),
    pooling="mean",
    mlp_widths=(16, 16, 16),
    dropout=0.1,
)

models = []
for seed in (1, 2, 3, 4):
    rng = np.random.default_rng(seed)
    model = NLIModel(config, vocab, chars, random_embeddings(vocab, rng, scale=0.5), rng)
    result = train(
        model, train_examples, dev_examples,
        TrainConfig(learning_rate=0.002, batch_size=16, max_epochs=3, seed=seed),
    )
    single = evaluate(model, dev_examples)
    print(f"seed {seed}: dev accuracy {100 * single.overall_accuracy:.1f}")
    models.append(model)

combined = ensemble_evaluate(models, dev_examples)
print(f"4-model ensemble: {100 * combined.overall_accuracy:.1f}\n")

count = export_representations(models[0], dev_examples[:5], "representations.tsv")
width = len(open("representations.tsv").readline().split("\t"))
print(f"exported {count} records to representations.tsv ({width - 2} values per row)")
