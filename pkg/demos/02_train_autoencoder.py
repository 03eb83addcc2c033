"""
Training the bottleneck autoencoder
===================================

Clean, normalize and split the data, then fit the 10-9-10 network with
conjugate gradients and early stopping on the validation split.
"""
from aeimpute import (
    NetworkConfig, NormalizationParams, SynthConfig, generate, init_model, inject_mar,
    listwise_clean, normalize, split_dataset, train,
)
from aeimpute.autoencoder import loss_mse, model_to_text

full = generate(SynthConfig(n_records=3000, seed=1))
missing, _ = inject_mar(full, SynthConfig(seed=1))

# listwise deletion drops every record with a blank field
clean = listwise_clean(missing)
print(len(missing), "records,", len(clean), "complete")

norm = NormalizationParams.from_schema(clean.schema)
tr, va, te = split_dataset(normalize(clean, norm), seed=1)

model, report = train(init_model(NetworkConfig(seed=1), norm), tr, va, max_cycles=400)
print("cycles run:", report.cycles_run, " best cycle:", report.best_cycle)
print("train MSE %.2e   validation MSE %.2e   test MSE %.2e"
      % (report.final_train_mse, report.best_validation_mse, loss_mse(model, te)))

# models are plain text
print(model_to_text(model).splitlines()[:2])
