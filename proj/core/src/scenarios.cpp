#include "plmpc/scenarios.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

namespace plmpc {

namespace {

/// Box constraints lb <= x <= ub, ulb <= u <= uub as polytope rows
/// [I; -I; 0; 0] x + [0; 0; 1; -1] u <= [ub; -lb; uub; -ulb].
void box_rows(const VectorXd& lb, const VectorXd& ub, double u_abs, MatrixXd& F, MatrixXd& G,
              VectorXd& f) {
    const int n = static_cast<int>(lb.size());
    F = MatrixXd::Zero(2 * n + 2, n);
    G = MatrixXd::Zero(2 * n + 2, 1);
    f = VectorXd::Zero(2 * n + 2);
    F.topRows(n) = MatrixXd::Identity(n, n);
    F.block(n, 0, n, n) = -MatrixXd::Identity(n, n);
    f.head(n) = ub;
    f.segment(n, n) = -lb;
    G(2 * n, 0) = 1.0;
    G(2 * n + 1, 0) = -1.0;
    f[2 * n] = u_abs;
    f[2 * n + 1] = u_abs;
}

}  // namespace

void ScenarioSpec::validate() const {
    model.validate();
    constraints.validate(model);
    costs.validate(model);
    basis.validate();
    theta_domain.validate();
    if (theta_domain.lo.size() != basis.coefficient_count())
        throw std::invalid_argument("scenario " + name + ": theta domain does not match basis");
    if (lmpc.horizon < 1 || lmpc.horizon > model.period)
        throw std::invalid_argument("scenario " + name + ": horizon out of range");
}

ScenarioSpec spring_mass_scenario() {
    ScenarioSpec s;
    s.name = "spring-mass";
    const int T = 50;
    const int n = 2;

    s.model.period = T;
    s.model.x_s = VectorXd(n);
    s.model.x_s << 3.0, 0.0;
    for (int t = 0; t <= T; ++t) {
        MatrixXd A(n, n);
        A << 1.0, 0.1, 0.1 * (1.0 - std::sin(2.0 * std::numbers::pi * t / T)), 1.0;
        MatrixXd B(n, 1);
        B << 0.0, 0.1;
        s.model.A.push_back(A);
        s.model.B.push_back(B);
        s.model.C.push_back(MatrixXd::Identity(n, n));  // "+ w_t" means identity injection
    }

    for (int t = 0; t <= T; ++t) {
        VectorXd lb(n), ub(n);
        if (t < T / 2) {
            lb << -1.0, -3.0;
            ub << 4.0, 3.0;
        } else {
            lb << -4.0, -3.0;
            ub << 1.0, 3.0;
        }
        MatrixXd F, G;
        VectorXd f;
        box_rows(lb, ub, 10.0, F, G, f);
        s.constraints.F.push_back(F);
        s.constraints.G.push_back(G);
        s.constraints.f.push_back(f);

        StageCost c;
        c.state_weight = VectorXd::Zero(n);
        c.state_weight[0] = 1.0;
        c.state_ref = VectorXd::Zero(n);
        c.state_ref[0] = t < T / 2 ? 2.0 : -2.0;  // ||x1 - 2|| then ||x1 + 2||
        c.input_weight = VectorXd::Ones(1);
        c.l1_price = VectorXd::Zero(1);
        s.costs.stages.push_back(c);
    }

    s.basis.period = T;
    s.basis.truncation_order = 1;
    s.basis.channels = {
        {WaveformAtom::constant(), WaveformAtom::sine(1)},
        {WaveformAtom::constant(), WaveformAtom::sine(1)},
    };
    s.basis.residual_lo = VectorXd::Zero(2);
    s.basis.residual_hi = VectorXd::Zero(2);

    s.theta_domain.lo = VectorXd::Constant(4, -0.1);
    s.theta_domain.hi = VectorXd::Constant(4, 0.1);

    s.Q_lqr = MatrixXd::Identity(n, n);
    s.R_lqr = MatrixXd::Identity(1, 1);
    s.lmpc.horizon = 4;
    return s;
}

ScenarioSpec building_scenario() {
    ScenarioSpec s;
    s.name = "building";
    const int T = 144;
    const int n = 3;

    MatrixXd A(n, n);
    A << 0.8511, 0.0541, 0.0707,
         0.1293, 0.8635, 0.0055,
         0.0989, 0.0032, 0.7541;
    MatrixXd B(n, 1);
    B << 0.0035, 0.0003, 0.0002;
    MatrixXd C(n, n);
    C << 22.2170, 1.7912, 42.2123,
         1.5376, 0.6944, 2.9214,
         103.1813, 0.1032, 196.0444;
    C *= 1e-3;

    s.model.period = T;
    s.model.x_s = VectorXd(n);
    s.model.x_s << 19.0, 19.0, 15.0;
    s.model.A.assign(T + 1, A);
    s.model.B.assign(T + 1, B);
    s.model.C.assign(T + 1, C);

    for (int t = 0; t <= T; ++t) {
        // comfort band on the room temperature only; walls unconstrained
        const bool work_hours = t >= T / 3 && t <= 3 * T / 4;  // inclusive end, as printed
        const double lo = work_hours ? 22.0 : 18.0;
        const double hi = work_hours ? 26.0 : 30.0;
        MatrixXd F = MatrixXd::Zero(4, n);
        MatrixXd G = MatrixXd::Zero(4, 1);
        VectorXd f(4);
        F(0, 0) = 1.0;
        F(1, 0) = -1.0;
        G(2, 0) = 1.0;
        G(3, 0) = -1.0;
        f << hi, -lo, 30.0, 30.0;
        s.constraints.F.push_back(F);
        s.constraints.G.push_back(G);
        s.constraints.f.push_back(f);

        StageCost c;
        c.state_weight = VectorXd::Zero(n);
        c.state_weight[0] = 1.0;
        c.state_ref = VectorXd::Zero(n);
        // reference window is half-open at 3T/4, unlike the constraint band
        c.state_ref[0] = (t >= T / 3 && t < 3 * T / 4) ? 24.0 : 20.0;
        c.input_weight = VectorXd::Zero(1);
        c.l1_price = VectorXd::Ones(1);
        c.l1_price[0] = (t >= 5 * T / 12 && t < 2 * T / 3) ? 2.0 : 1.0;
        s.costs.stages.push_back(c);
    }

    s.basis.period = T;
    s.basis.truncation_order = 1;
    s.basis.channels = {
        {WaveformAtom::constant(), WaveformAtom::sine(1)},                        // a1, a2
        {WaveformAtom::triangle(T / 4.0, T / 2.0, 3.0 * T / 4.0)},                // a3
        {WaveformAtom::constant(), WaveformAtom::square(T / 3.0, 3.0 * T / 4.0)}  // a4, a5
    };
    s.basis.residual_lo = VectorXd(3);
    s.basis.residual_lo << -3.0, -5.0, -2.0;
    s.basis.residual_hi = VectorXd(3);
    s.basis.residual_hi << 3.0, 5.0, 2.0;

    s.theta_domain.lo = VectorXd(5);
    s.theta_domain.lo << 10.0, -6.0, 0.0, 0.0, 6.0;
    s.theta_domain.hi = VectorXd(5);
    s.theta_domain.hi << 14.0, -2.0, 16.0, 2.0, 7.0;

    s.Q_lqr = 10.0 * MatrixXd::Identity(n, n);
    s.R_lqr = MatrixXd::Identity(1, 1);
    s.lmpc.horizon = 16;
    // the closed loop contracts slowly (spectral radius 0.96); the (s, alpha)
    // search needs roughly 430 steps to certify alpha <= 0.05
    s.rpi_horizon_cap = 1000;
    return s;
}

ScenarioSpec tiny_scenario() {
    ScenarioSpec s;
    s.name = "tiny";
    const int T = 6;

    s.model.period = T;
    s.model.x_s = VectorXd::Constant(1, 0.5);
    for (int t = 0; t <= T; ++t) {
        s.model.A.push_back(MatrixXd::Constant(1, 1, 0.9));
        s.model.B.push_back(MatrixXd::Constant(1, 1, 0.5));
        s.model.C.push_back(MatrixXd::Constant(1, 1, 1.0));
    }

    const double refs[] = {1.0, 1.0, 0.5, 0.0, -0.5, -1.0, -1.0};
    for (int t = 0; t <= T; ++t) {
        MatrixXd F, G;
        VectorXd f;
        box_rows(VectorXd::Constant(1, -2.0), VectorXd::Constant(1, 2.0), 1.0, F, G, f);
        s.constraints.F.push_back(F);
        s.constraints.G.push_back(G);
        s.constraints.f.push_back(f);

        StageCost c;
        c.state_weight = VectorXd::Ones(1);
        c.state_ref = VectorXd::Constant(1, refs[t]);
        c.input_weight = VectorXd::Constant(1, 0.1);
        c.l1_price = VectorXd::Zero(1);
        s.costs.stages.push_back(c);
    }

    s.basis.period = T;
    s.basis.truncation_order = 0;
    s.basis.channels = {{WaveformAtom::constant()}};
    s.basis.residual_lo = VectorXd::Constant(1, -0.02);
    s.basis.residual_hi = VectorXd::Constant(1, 0.02);

    s.theta_domain.lo = VectorXd::Constant(1, -0.05);
    s.theta_domain.hi = VectorXd::Constant(1, 0.05);

    s.Q_lqr = MatrixXd::Identity(1, 1);
    s.R_lqr = MatrixXd::Identity(1, 1);
    s.lmpc.horizon = 2;
    return s;
}

ScenarioSpec scenario_by_name(const std::string& name) {
    if (name == "spring-mass") return spring_mass_scenario();
    if (name == "building") return building_scenario();
    if (name == "tiny") return tiny_scenario();
    throw std::invalid_argument("unknown scenario '" + name +
                                "' (expected spring-mass, building or tiny)");
}

namespace {

using nlohmann::json;

MatrixXd matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw std::invalid_argument("inline scenario: matrices are arrays of row arrays");
    MatrixXd M(j.size(), j[0].size());
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (j[r].size() != j[0].size())
            throw std::invalid_argument("inline scenario: ragged matrix rows");
        for (std::size_t c = 0; c < j[r].size(); ++c) M(r, c) = j[r][c].get<double>();
    }
    return M;
}

VectorXd vector_from_json(const json& j) {
    VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
    return v;
}

/// A per-step schedule given either once (held constant) or as T+1 entries.
template <typename T, typename Parse>
std::vector<T> schedule_from_json(const json& j, int period, Parse parse, bool per_step_nested) {
    std::vector<T> out;
    const bool scheduled = per_step_nested && j.is_array() &&
                           static_cast<int>(j.size()) == period + 1;
    if (scheduled) {
        for (const auto& entry : j) out.push_back(parse(entry));
    } else {
        out.assign(period + 1, parse(j));
    }
    return out;
}

WaveformAtom atom_from_json(const json& j, int period) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") return WaveformAtom::constant();
    if (kind == "sine") return WaveformAtom::sine(j.at("harmonic").get<int>());
    if (kind == "cosine") return WaveformAtom::cosine(j.at("harmonic").get<int>());
    const auto window = j.at("window");
    // window entries are fractions of the period
    if (kind == "triangle")
        return WaveformAtom::triangle(window.at(0).get<double>() * period,
                                      window.at(1).get<double>() * period,
                                      window.at(2).get<double>() * period);
    if (kind == "square")
        return WaveformAtom::square(window.at(0).get<double>() * period,
                                    window.at(1).get<double>() * period);
    throw std::invalid_argument("inline scenario: unknown atom kind '" + kind + "'");
}

}  // namespace

ScenarioSpec scenario_from_json_text(const std::string& text) {
    const json doc = json::parse(text);
    ScenarioSpec s;
    s.name = doc.value("name", "inline");
    const int T = doc.at("period").get<int>();

    s.model.period = T;
    s.model.A = schedule_from_json<MatrixXd>(
        doc.at("A"), T, [](const json& j) { return matrix_from_json(j); },
        doc.at("A").is_array() && doc.at("A")[0].is_array() && doc.at("A")[0][0].is_array());
    s.model.B = schedule_from_json<MatrixXd>(
        doc.at("B"), T, [](const json& j) { return matrix_from_json(j); },
        doc.at("B").is_array() && doc.at("B")[0].is_array() && doc.at("B")[0][0].is_array());
    s.model.C = schedule_from_json<MatrixXd>(
        doc.at("C"), T, [](const json& j) { return matrix_from_json(j); },
        doc.at("C").is_array() && doc.at("C")[0].is_array() && doc.at("C")[0][0].is_array());
    s.model.x_s = vector_from_json(doc.at("x_s"));

    const auto& con = doc.at("constraints");
    s.constraints.F = schedule_from_json<MatrixXd>(
        con.at("F"), T, [](const json& j) { return matrix_from_json(j); },
        con.at("F")[0][0].is_array());
    s.constraints.G = schedule_from_json<MatrixXd>(
        con.at("G"), T, [](const json& j) { return matrix_from_json(j); },
        con.at("G")[0][0].is_array());
    s.constraints.f = schedule_from_json<VectorXd>(
        con.at("f"), T, [](const json& j) { return vector_from_json(j); },
        con.at("f")[0].is_array());

    const auto& cost = doc.at("costs");
    auto parse_stage = [](const json& j) {
        StageCost c;
        c.state_weight = vector_from_json(j.at("state_weight"));
        c.state_ref = vector_from_json(j.at("state_ref"));
        c.input_weight = vector_from_json(j.at("input_weight"));
        c.l1_price = vector_from_json(j.at("l1_price"));
        return c;
    };
    s.costs.stages = schedule_from_json<StageCost>(cost, T, parse_stage, cost.is_array());

    const auto& dist = doc.at("disturbance");
    s.basis.period = T;
    s.basis.truncation_order = dist.value("truncation_order", 1);
    for (const auto& channel : dist.at("channels")) {
        std::vector<WaveformAtom> atoms;
        for (const auto& atom : channel) atoms.push_back(atom_from_json(atom, T));
        s.basis.channels.push_back(std::move(atoms));
    }
    s.basis.residual_lo = vector_from_json(dist.at("residual_lo"));
    s.basis.residual_hi = vector_from_json(dist.at("residual_hi"));
    s.theta_domain.lo = vector_from_json(dist.at("theta_lo"));
    s.theta_domain.hi = vector_from_json(dist.at("theta_hi"));

    s.Q_lqr = matrix_from_json(doc.at("Q_lqr"));
    s.R_lqr = matrix_from_json(doc.at("R_lqr"));
    s.lmpc.horizon = doc.at("horizon").get<int>();
    s.rpi_alpha_target = doc.value("rpi_alpha_target", 0.05);
    s.rpi_horizon_cap = doc.value("rpi_horizon_cap", 200);

    s.validate();
    return s;
}

}  // namespace plmpc
