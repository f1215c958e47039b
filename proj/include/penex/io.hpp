#pragma once

#include <filesystem>
#include <optional>

#include "penex/model.hpp"

namespace penex {

/**
 * On-disk dataset: a directory with meta.json plus little-endian float64
 * blobs X.bin (row-major n x p), y.bin, beta_star.bin and, for linear data,
 * eps.bin.
 */
void save_dataset(const std::filesystem::path& dir, const Dataset& data,
                  std::optional<Index> group_size = std::nullopt);
Dataset load_dataset(const std::filesystem::path& dir);

/// Group size recorded in meta.json, if any.
std::optional<Index> load_group_size(const std::filesystem::path& dir);

void write_vector(const std::filesystem::path& path, const VectorXd& v);
VectorXd read_vector(const std::filesystem::path& path);

/// Row-major float64 blob.
void write_matrix(const std::filesystem::path& path, const MatrixXd& m);
MatrixXd read_matrix(const std::filesystem::path& path, Index rows, Index cols);

}  // namespace penex
