#pragma once

#include <filesystem>
#include <vector>

#include "bnn/datasets/tasks.hpp"

namespace bnn {

/// Writes <TASK>_train_<r>.csv (x1..xD,y) for every replicate, <TASK>_test.csv (x1..xD,y,latent)
/// and <TASK>_manifest.json. Values are printed with 17 significant digits, so reading
/// them back is exact. Returns the files written.
std::vector<std::filesystem::path> write_bundle(const ReplicateBundle& bundle, const std::filesystem::path& dir);

/// Reads a dataset CSV written by write_bundle (extra trailing columns such as `latent` are ignored).
RegressionDataset read_dataset_csv(const std::filesystem::path& path);

}  // namespace bnn
