#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "coge/graph.hpp"

namespace coge {

/// Malformed dataset input. `line()` is 1-based, 0 when not line-specific.
class DatasetError : public std::runtime_error {
public:
    DatasetError(const std::string& message, std::size_t line)
        : std::runtime_error(line ? "line " + std::to_string(line) + ": " + message : message),
          line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Writes one JSON object per graph:
///   {"id", "n", "edges": [[u,v],...], "features": [[...],...], "label",
///    "gt_edges": [[u,v],...], "split": "train"|"test", "seed"}
/// Edges are written with u < v. "seed" is optional on read. The file is
/// written to a temporary sibling and renamed into place.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

/// Inverse of save_dataset. Disconnected graphs are loaded but their ids are
/// reported in Dataset::disconnected_graphs. An empty file yields an empty
/// dataset with feature_dim unset.
Dataset load_dataset(const std::filesystem::path& path);

std::string dataset_to_jsonl(const Dataset& ds);
Dataset dataset_from_jsonl(const std::string& text);

/// Writes `contents` to `path` via a temporary file and rename.
void write_file_atomically(const std::filesystem::path& path, const std::string& contents);

}  // namespace coge
