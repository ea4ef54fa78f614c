#include "rsmdp/model.hpp"

#include "rsmdp/errors.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>

namespace rsmdp {

using json = nlohmann::json;

const char* to_string(CostTag tag) {
    return tag == CostTag::Primary ? "c" : "k";
}

const Matrix& Mdp::costs(CostTag tag) const {
    if (tag == CostTag::Primary) return cost;
    if (!constraint_cost) throw ValidationError("constraint cost k requested but not present");
    return *constraint_cost;
}

namespace {

std::string where(int i, int u) {
    return "(state " + std::to_string(i) + ", action " + std::to_string(u) + ")";
}

}  // namespace

void validate(const Mdp& m) {
    if (m.n_states <= 0) throw ValidationError("n_states must be positive");
    if (m.n_actions <= 0) throw ValidationError("n_actions must be positive");
    if (static_cast<int>(m.p.size()) != m.n_states)
        throw ValidationError("p has " + std::to_string(m.p.size()) + " state blocks, expected " +
                              std::to_string(m.n_states));
    for (int i = 0; i < m.n_states; ++i) {
        const Matrix& pi = m.p[i];
        if (pi.rows() != m.n_actions || pi.cols() != m.n_states)
            throw ValidationError("p block of state " + std::to_string(i) + " has shape mismatch");
        for (int u = 0; u < m.n_actions; ++u) {
            for (int j = 0; j < m.n_states; ++j) {
                const double v = pi(u, j);
                if (!std::isfinite(v) || v < 0.0 || v > 1.0)
                    throw ValidationError("p entry out of [0,1] at " + where(i, u) + ", next state " +
                                          std::to_string(j));
            }
            const double s = pi.row(u).sum();
            if (std::abs(s - 1.0) > 1e-9) {
                std::ostringstream os;
                os.precision(17);
                os << "p row at " << where(i, u) << " sums to " << s;
                throw ValidationError(os.str());
            }
        }
    }
    auto check_costs = [&](const Matrix& c, const char* name) {
        if (c.rows() != m.n_states || c.cols() != m.n_actions)
            throw ValidationError(std::string(name) + " has shape mismatch");
        for (int i = 0; i < m.n_states; ++i)
            for (int u = 0; u < m.n_actions; ++u)
                if (!std::isfinite(c(i, u)))
                    throw ValidationError(std::string(name) + " not finite at " + where(i, u));
    };
    check_costs(m.cost, "cost");
    if (m.constraint_cost) check_costs(*m.constraint_cost, "constraint_cost");
    if (m.bound && !m.constraint_cost) throw ValidationError("bound given without constraint_cost");
    if (m.bound && !std::isfinite(*m.bound)) throw ValidationError("bound is not finite");
    if (!m.state_names.empty() && static_cast<int>(m.state_names.size()) != m.n_states)
        throw ValidationError("state_names length mismatch");
    if (!m.action_names.empty() && static_cast<int>(m.action_names.size()) != m.n_actions)
        throw ValidationError("action_names length mismatch");
}

Mdp make_mdp(std::vector<Matrix> p, Matrix cost, std::optional<Matrix> constraint_cost,
             std::optional<double> bound) {
    Mdp m;
    m.n_states = static_cast<int>(cost.rows());
    m.n_actions = static_cast<int>(cost.cols());
    m.p = std::move(p);
    m.cost = std::move(cost);
    m.constraint_cost = std::move(constraint_cost);
    m.bound = bound;
    for (int i = 0; i < m.n_states; ++i) m.state_names.push_back(std::to_string(i));
    for (int u = 0; u < m.n_actions; ++u) m.action_names.push_back(std::to_string(u));
    validate(m);
    return m;
}

namespace {

std::vector<std::string> read_labels(const json& node, const char* field) {
    std::vector<std::string> out;
    if (node.is_number_integer()) {
        const auto n = node.get<long long>();
        if (n <= 0) throw ValidationError(std::string(field) + " count must be positive");
        for (long long k = 0; k < n; ++k) out.push_back(std::to_string(k));
    } else if (node.is_array()) {
        for (const auto& e : node) {
            if (!e.is_string()) throw ParseError(std::string(field) + " entries must be strings");
            out.push_back(e.get<std::string>());
        }
    } else {
        throw ParseError(std::string(field) + " must be a list of names or an integer count");
    }
    return out;
}

Matrix read_matrix(const json& node, int rows, int cols, const char* field) {
    if (!node.is_array() || static_cast<int>(node.size()) != rows)
        throw ValidationError(std::string(field) + " must have " + std::to_string(rows) + " rows");
    Matrix out(rows, cols);
    for (int r = 0; r < rows; ++r) {
        const auto& row = node[r];
        if (!row.is_array() || static_cast<int>(row.size()) != cols)
            throw ValidationError(std::string(field) + " row " + std::to_string(r) + " must have " +
                                  std::to_string(cols) + " entries");
        for (int k = 0; k < cols; ++k) {
            if (!row[k].is_number())
                throw ParseError(std::string(field) + " entry (" + std::to_string(r) + "," +
                                 std::to_string(k) + ") is not a number");
            out(r, k) = row[k].get<double>();
        }
    }
    return out;
}

json matrix_json(const Matrix& a) {
    json rows = json::array();
    for (int r = 0; r < a.rows(); ++r) {
        json row = json::array();
        for (int k = 0; k < a.cols(); ++k) row.push_back(a(r, k));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

Mdp parse_problem(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("problem file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("problem file must hold a JSON object");
    for (const char* field : {"states", "actions", "p", "cost"})
        if (!doc.contains(field)) throw ParseError(std::string("missing field \"") + field + "\"");

    Mdp m;
    m.state_names = read_labels(doc["states"], "states");
    m.action_names = read_labels(doc["actions"], "actions");
    m.n_states = static_cast<int>(m.state_names.size());
    m.n_actions = static_cast<int>(m.action_names.size());

    const auto& p = doc["p"];
    if (!p.is_array() || static_cast<int>(p.size()) != m.n_states)
        throw ValidationError("p must have one block per state");
    for (int i = 0; i < m.n_states; ++i) {
        const std::string name = "p[" + std::to_string(i) + "]";
        m.p.push_back(read_matrix(p[i], m.n_actions, m.n_states, name.c_str()));
    }
    m.cost = read_matrix(doc["cost"], m.n_states, m.n_actions, "cost");
    if (doc.contains("constraint_cost"))
        m.constraint_cost = read_matrix(doc["constraint_cost"], m.n_states, m.n_actions, "constraint_cost");
    if (doc.contains("bound")) {
        if (!doc["bound"].is_number()) throw ParseError("bound must be a number");
        m.bound = doc["bound"].get<double>();
    }
    validate(m);
    return m;
}

Mdp load_problem(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open problem file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_problem(buf.str());
}

std::string dump_problem(const Mdp& m) {
    json doc;
    doc["states"] = m.state_names.empty() ? json(m.n_states) : json(m.state_names);
    doc["actions"] = m.action_names.empty() ? json(m.n_actions) : json(m.action_names);
    json p = json::array();
    for (const auto& block : m.p) p.push_back(matrix_json(block));
    doc["p"] = std::move(p);
    doc["cost"] = matrix_json(m.cost);
    if (m.constraint_cost) doc["constraint_cost"] = matrix_json(*m.constraint_cost);
    if (m.bound) doc["bound"] = *m.bound;
    return doc.dump(2);
}

void save_problem(const Mdp& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw ParseError("cannot write problem file " + path.string());
    out << dump_problem(m) << '\n';
}

std::vector<int> support(const Mdp& m, int i, int u) {
    std::vector<int> out;
    for (int j = 0; j < m.n_states; ++j)
        if (m.p[i](u, j) >= kSupportFloor) out.push_back(j);
    return out;
}

std::vector<int> support_union(const Mdp& m, int i) {
    std::vector<int> out;
    for (int j = 0; j < m.n_states; ++j)
        if (m.p[i].col(j).maxCoeff() >= kSupportFloor) out.push_back(j);
    return out;
}

bool has_uniform_supports(const Mdp& m) {
    for (int i = 0; i < m.n_states; ++i) {
        const auto ref = support(m, i, 0);
        for (int u = 1; u < m.n_actions; ++u)
            if (support(m, i, u) != ref) return false;
    }
    return true;
}

Policy Policy::deterministic(std::vector<int> actions, int n_actions) {
    Policy pol;
    pol.kind_ = Kind::Deterministic;
    pol.y_ = Matrix::Zero(static_cast<Eigen::Index>(actions.size()), n_actions);
    for (std::size_t i = 0; i < actions.size(); ++i) {
        if (actions[i] < 0 || actions[i] >= n_actions)
            throw ValidationError("policy action out of range at state " + std::to_string(i));
        pol.y_(static_cast<Eigen::Index>(i), actions[i]) = 1.0;
    }
    pol.det_ = std::move(actions);
    return pol;
}

Policy Policy::randomized(Matrix y) {
    for (int i = 0; i < y.rows(); ++i) {
        if ((y.row(i).array() < 0.0).any() || !y.row(i).allFinite())
            throw ValidationError("randomized policy has a negative entry at state " + std::to_string(i));
        if (std::abs(y.row(i).sum() - 1.0) > 1e-9)
            throw ValidationError("randomized policy row " + std::to_string(i) + " does not sum to 1");
    }
    Policy pol;
    pol.kind_ = Kind::Randomized;
    pol.y_ = std::move(y);
    return pol;
}

const std::vector<int>& Policy::actions() const {
    if (kind_ != Kind::Deterministic) throw ValidationError("policy is not deterministic");
    return det_;
}

std::vector<int> Policy::argmax_actions() const {
    std::vector<int> out(static_cast<std::size_t>(y_.rows()));
    for (int i = 0; i < y_.rows(); ++i) {
        int best = 0;
        for (int u = 1; u < y_.cols(); ++u)
            if (y_(i, u) > y_(i, best)) best = u;
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

bool Policy::is_point_mass(double tol) const {
    for (int i = 0; i < y_.rows(); ++i)
        if (y_.row(i).maxCoeff() < 1.0 - tol) return false;
    return true;
}

void Policy::check_against(const Mdp& m) const {
    if (y_.rows() != m.n_states || y_.cols() != m.n_actions)
        throw ValidationError("policy shape does not match the model");
}

}  // namespace rsmdp
