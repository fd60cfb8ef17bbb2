#include "plos/matrix_io.hpp"

#include "plos/error.hpp"
#include "plos/lang.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace plos {

void write_matrix_market(std::ostream& os, const SparseMatrix& m) {
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << m.rows() << " " << m.cols() << " " << m.nnz() << "\n";
    for (const auto& t : m.triplets())
        os << t.row + 1 << " " << t.col + 1 << " " << format_number(t.value) << "\n";
}

SparseMatrix read_matrix_market(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("%%MatrixMarket", 0) != 0)
        throw InputError("not a Matrix Market file");
    if (line.find("coordinate") == std::string::npos || line.find("real") == std::string::npos ||
        line.find("general") == std::string::npos)
        throw InputError("only 'coordinate real general' Matrix Market files are supported");
    while (std::getline(is, line))
        if (!line.empty() && line[0] != '%') break;
    std::istringstream header(line);
    std::size_t rows = 0, cols = 0, count = 0;
    if (!(header >> rows >> cols >> count)) throw InputError("malformed Matrix Market size line");
    std::vector<Triplet> t;
    t.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        std::size_t i = 0, j = 0;
        double v = 0;
        if (!(is >> i >> j >> v)) throw InputError("truncated Matrix Market entries");
        if (i < 1 || j < 1) throw InputError("Matrix Market indices are 1-based");
        t.push_back({i - 1, j - 1, v});
    }
    return SparseMatrix::from_triplets(rows, cols, std::move(t));
}

std::string to_json(const SparseMatrix& m) {
    nlohmann::ordered_json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    auto trip = nlohmann::ordered_json::array();
    for (const auto& t : m.triplets()) trip.push_back({t.row + 1, t.col + 1, t.value});
    j["triplets"] = std::move(trip);
    return j.dump();
}

SparseMatrix matrix_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        const auto rows = j.at("rows").get<std::size_t>();
        const auto cols = j.at("cols").get<std::size_t>();
        std::vector<Triplet> t;
        for (const auto& e : j.at("triplets")) {
            const auto i = e.at(0).get<std::size_t>();
            const auto c = e.at(1).get<std::size_t>();
            if (i < 1 || c < 1) throw InputError("matrix JSON indices are 1-based");
            t.push_back({i - 1, c - 1, e.at(2).get<double>()});
        }
        return SparseMatrix::from_triplets(rows, cols, std::move(t));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed matrix JSON: ") + e.what());
    }
}

SparseMatrix load_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
        std::stringstream ss;
        ss << in.rdbuf();
        return matrix_from_json(ss.str());
    }
    return read_matrix_market(in);
}

} // namespace plos
