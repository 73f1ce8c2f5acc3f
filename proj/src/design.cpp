#include "fqr/design.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

#include "fqr/text_io.hpp"

namespace fqr {

using nlohmann::json;

void FunctionalDataset::validate() const {
    const int nn = n();
    if (nn < 1) throw std::invalid_argument("dataset: no samples");
    if (z.rows() != nn) throw std::invalid_argument("dataset: Z row count != n");
    if (d() < 1) throw std::invalid_argument("dataset: need at least the intercept column");
    for (int i = 0; i < nn; ++i) {
        if (z(i, 0) != 1.0) {
            throw std::invalid_argument("dataset: Z column 0 must be the intercept (row " +
                                        std::to_string(i) + ")");
        }
    }
    if (!y.allFinite()) throw std::invalid_argument("dataset: non-finite response");
    if (!z.allFinite()) throw std::invalid_argument("dataset: non-finite scalar covariate");
    const int G = grid_size();
    if (m() > 0 && G < 2) throw std::invalid_argument("dataset: grid needs >= 2 points");
    for (int g = 1; g < G; ++g) {
        if (!(grid[g] > grid[g - 1])) {
            throw std::invalid_argument("dataset: grid must be strictly increasing at index " +
                                        std::to_string(g));
        }
    }
    for (int l = 0; l < m(); ++l) {
        if (x[l].rows() != nn || x[l].cols() != G) {
            throw std::invalid_argument("dataset: X block " + std::to_string(l) +
                                        " has wrong shape");
        }
        if (!x[l].allFinite()) {
            for (int i = 0; i < nn; ++i) {
                for (int g = 0; g < G; ++g) {
                    if (!std::isfinite(x[l](i, g))) {
                        throw std::invalid_argument(
                            "dataset: non-finite functional value (covariate " +
                            std::to_string(l) + ", row " + std::to_string(i) + ", grid point " +
                            std::to_string(g) + ")");
                    }
                }
            }
        }
    }
}

FunctionalDataset FunctionalDataset::subset(const std::vector<int>& rows) const {
    FunctionalDataset out;
    const int k = static_cast<int>(rows.size());
    out.y.resize(k);
    out.z.resize(k, z.cols());
    for (int i = 0; i < k; ++i) {
        out.y[i] = y[rows[i]];
        out.z.row(i) = z.row(rows[i]);
    }
    out.x.reserve(x.size());
    for (const auto& block : x) {
        Eigen::MatrixXd sub(k, block.cols());
        for (int i = 0; i < k; ++i) sub.row(i) = block.row(rows[i]);
        out.x.push_back(std::move(sub));
    }
    out.grid = grid;
    out.response_name = response_name;
    out.scalar_names = scalar_names;
    out.functional_names = functional_names;
    return out;
}

DesignMatrices DesignMatrices::subset(const std::vector<int>& rows) const {
    DesignMatrices out;
    const int k = static_cast<int>(rows.size());
    out.u.resize(k, u.cols());
    out.z.resize(k, z.cols());
    out.y.resize(k);
    for (int i = 0; i < k; ++i) {
        out.u.row(i) = u.row(rows[i]);
        out.z.row(i) = z.row(rows[i]);
        out.y[i] = y[rows[i]];
    }
    out.num_basis = num_basis;
    out.num_functional = num_functional;
    out.quadrature = quadrature;
    return out;
}

Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& grid) {
    const int G = static_cast<int>(grid.size());
    Eigen::VectorXd w = Eigen::VectorXd::Zero(G);
    for (int g = 0; g + 1 < G; ++g) {
        const double half = 0.5 * (grid[g + 1] - grid[g]);
        w[g] += half;
        w[g + 1] += half;
    }
    return w;
}

DesignMatrices assemble_design(const FunctionalDataset& data, const SplineBasis& basis) {
    data.validate();
    const int G = data.grid_size();
    const int nb = basis.size();
    const double lo = basis.domain_start(), hi = basis.domain_end();
    const double slack = 1e-9 * (hi - lo);
    if (data.m() > 0 &&
        (data.grid[0] < lo - slack || data.grid[G - 1] > hi + slack)) {
        throw std::invalid_argument("assemble_design: observation grid exceeds basis domain");
    }
    if (data.m() > 0 && G < 2 * nb) {
        std::fprintf(stderr,
                     "fqr: warning: grid has %d points for %d basis functions; "
                     "quadrature may be coarse\n",
                     G, nb);
    }

    DesignMatrices design;
    design.z = data.z;
    design.y = data.y;
    design.num_basis = nb;
    design.num_functional = data.m();
    design.u.resize(data.n(), data.m() * nb);

    if (data.m() > 0) {
        const Eigen::VectorXd w = trapezoid_weights(data.grid);
        Eigen::MatrixXd basis_at_grid(G, nb);  // rows: weighted basis evaluations
        for (int g = 0; g < G; ++g) {
            const double t = std::clamp(data.grid[g], lo, hi);
            basis_at_grid.row(g) = w[g] * basis.eval(t).transpose();
        }
        for (int l = 0; l < data.m(); ++l) {
            design.u.middleCols(l * nb, nb).noalias() = data.x[l] * basis_at_grid;
        }
    }
    return design;
}

namespace {

// Trailing integer in a column name, e.g. "X1_t017" -> 17.
long trailing_index(const std::string& name) {
    int end = static_cast<int>(name.size());
    int start = end;
    while (start > 0 && std::isdigit(static_cast<unsigned char>(name[start - 1]))) --start;
    if (start == end) return -1;
    return std::stol(name.substr(start, end - start));
}

}  // namespace

FunctionalDataset load_dataset(const std::string& csv_path, const std::string& manifest_path) {
    json manifest = json::parse(read_text_file(manifest_path));
    CsvTable table = read_csv(csv_path);
    const int n = static_cast<int>(table.rows.size());
    if (n == 0) throw std::runtime_error(csv_path + ": no data rows");

    FunctionalDataset data;
    data.response_name = manifest.at("response").get<std::string>();
    const int resp_col = table.column(data.response_name);
    if (resp_col < 0) {
        throw std::runtime_error(csv_path + ": missing response column '" + data.response_name +
                                 "'");
    }
    std::vector<int> scalar_cols;
    if (manifest.contains("scalars")) {
        for (const auto& s : manifest["scalars"]) {
            const std::string name = s.get<std::string>();
            const int col = table.column(name);
            if (col < 0) {
                throw std::runtime_error(csv_path + ": missing scalar column '" + name + "'");
            }
            data.scalar_names.push_back(name);
            scalar_cols.push_back(col);
        }
    }

    const auto& grid_json = manifest.at("grid");
    const int G = static_cast<int>(grid_json.size());
    data.grid.resize(G);
    for (int g = 0; g < G; ++g) data.grid[g] = grid_json[g].get<double>();

    struct FunctionalBlock {
        std::string name;
        std::vector<int> cols;
    };
    std::vector<FunctionalBlock> blocks;
    if (manifest.contains("functional")) {
        for (const auto& f : manifest["functional"]) {
            FunctionalBlock block;
            block.name = f.at("name").get<std::string>();
            const std::string prefix = f.at("prefix").get<std::string>();
            std::vector<std::pair<long, int>> found;
            for (std::size_t c = 0; c < table.header.size(); ++c) {
                const std::string& h = table.header[c];
                if (h.size() > prefix.size() && h.compare(0, prefix.size(), prefix) == 0) {
                    const long idx = trailing_index(h);
                    if (idx >= 0) found.emplace_back(idx, static_cast<int>(c));
                }
            }
            std::sort(found.begin(), found.end());
            if (static_cast<int>(found.size()) != G) {
                throw std::runtime_error(csv_path + ": functional covariate '" + block.name +
                                         "' (prefix '" + prefix + "') has " +
                                         std::to_string(found.size()) + " columns, grid has " +
                                         std::to_string(G));
            }
            for (auto& [idx, col] : found) block.cols.push_back(col);
            blocks.push_back(std::move(block));
        }
    }

    data.y.resize(n);
    data.z.resize(n, 1 + static_cast<int>(scalar_cols.size()));
    data.z.col(0).setOnes();
    for (auto& block : blocks) {
        data.functional_names.push_back(block.name);
        data.x.emplace_back(n, G);
    }
    for (int i = 0; i < n; ++i) {
        const auto& row = table.rows[i];
        auto cell = [&](int col) {
            return parse_double(row[col], csv_path + " row " + std::to_string(i + 2) +
                                              ", column '" + table.header[col] + "'");
        };
        data.y[i] = cell(resp_col);
        for (std::size_t s = 0; s < scalar_cols.size(); ++s) {
            data.z(i, 1 + static_cast<int>(s)) = cell(scalar_cols[s]);
        }
        for (std::size_t l = 0; l < blocks.size(); ++l) {
            for (int g = 0; g < G; ++g) data.x[l](i, g) = cell(blocks[l].cols[g]);
        }
    }
    data.validate();
    return data;
}

void save_dataset(const FunctionalDataset& data, const std::string& csv_path,
                  const std::string& manifest_path) {
    data.validate();
    CsvTable table;
    table.header.push_back(data.response_name);
    std::vector<std::string> scalar_names = data.scalar_names;
    while (static_cast<int>(scalar_names.size()) < data.d() - 1) {
        scalar_names.push_back("z" + std::to_string(scalar_names.size() + 1));
    }
    for (const auto& s : scalar_names) table.header.push_back(s);
    std::vector<std::string> functional_names = data.functional_names;
    while (static_cast<int>(functional_names.size()) < data.m()) {
        functional_names.push_back("X" + std::to_string(functional_names.size() + 1));
    }
    const int G = data.grid_size();
    for (int l = 0; l < data.m(); ++l) {
        for (int g = 0; g < G; ++g) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "_t%03d", g + 1);
            table.header.push_back(functional_names[l] + buf);
        }
    }
    for (int i = 0; i < data.n(); ++i) {
        std::vector<std::string> row;
        row.push_back(format_double(data.y[i]));
        for (int s = 1; s < data.d(); ++s) row.push_back(format_double(data.z(i, s)));
        for (int l = 0; l < data.m(); ++l) {
            for (int g = 0; g < G; ++g) row.push_back(format_double(data.x[l](i, g)));
        }
        table.rows.push_back(std::move(row));
    }
    write_csv(csv_path, table);

    json manifest;
    manifest["response"] = data.response_name;
    manifest["scalars"] = scalar_names;
    json functional = json::array();
    for (int l = 0; l < data.m(); ++l) {
        functional.push_back({{"name", functional_names[l]}, {"prefix", functional_names[l] + "_t"}});
    }
    manifest["functional"] = functional;
    json grid = json::array();
    for (int g = 0; g < G; ++g) grid.push_back(data.grid[g]);
    manifest["grid"] = grid;
    write_text_file(manifest_path, manifest.dump(2) + "\n");
}

}  // namespace fqr
