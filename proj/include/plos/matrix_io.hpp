#pragma once

#include "plos/linalg.hpp"

#include <iosfwd>
#include <string>

namespace plos {

// Matrix Market coordinate real general, 1-based indices.
void write_matrix_market(std::ostream& os, const SparseMatrix& m);
SparseMatrix read_matrix_market(std::istream& is);

// {"rows": n, "cols": m, "triplets": [[i, j, v], ...]} with 1-based i, j.
std::string to_json(const SparseMatrix& m);
SparseMatrix matrix_from_json(const std::string& text);

// Dispatches on extension: .json or Matrix Market otherwise.
SparseMatrix load_matrix(const std::string& path);

} // namespace plos
