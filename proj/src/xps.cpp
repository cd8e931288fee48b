#include "cavchar/xps.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <Eigen/Eigenvalues>

namespace cavchar::xps {

namespace {

constexpr double kPi = EIGEN_PI;
constexpr double kLn2 = 0.6931471805599453;
constexpr int kLaguerreNodes = 24;

// Gauss-Laguerre rule via the Golub-Welsch tridiagonal; weights sum to 1,
// which keeps the tail convolution exactly area-preserving.
struct LaguerreRule {
    Eigen::ArrayXd nodes;
    Eigen::ArrayXd weights;

    LaguerreRule(int n) {
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
        for (int k = 0; k < n; ++k) {
            jac(k, k) = 2.0 * k + 1.0;
            if (k > 0) {
                jac(k, k - 1) = k;
                jac(k - 1, k) = k;
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
        nodes = es.eigenvalues().array();
        weights = es.eigenvectors().row(0).array().square();
    }
};

const LaguerreRule& laguerre() {
    static const LaguerreRule rule(kLaguerreNodes);
    return rule;
}

struct LineValue {
    double value = 0.0;
    double d_x = 0.0;      // d/dx at fixed shape
    double d_width = 0.0;
    double d_mixing = 0.0;
    double d_asym = 0.0;   // via tail scale lambda = asym * width
};

// Unit-area pseudo-Voigt and its partials.
LineValue pseudo_voigt(double x, double width, double mixing) {
    LineValue lv;
    const double w2 = width * width;
    const double gauss_norm = 2.0 * std::sqrt(kLn2 / kPi) / width;
    const double g = gauss_norm * std::exp(-4.0 * kLn2 * x * x / w2);
    const double u = 2.0 * x / width;
    const double t = 1.0 + u * u;
    const double l = 2.0 / (kPi * width * t);

    lv.value = mixing * g + (1.0 - mixing) * l;
    const double dg_dx = g * (-8.0 * kLn2 * x / w2);
    const double dl_dx = -8.0 * u / (kPi * w2 * t * t);
    lv.d_x = mixing * dg_dx + (1.0 - mixing) * dl_dx;
    const double dg_dw = g * (-1.0 / width + 8.0 * kLn2 * x * x / (w2 * width));
    const double dl_dw = 2.0 * (4.0 * x * x - w2) / (kPi * (w2 + 4.0 * x * x) * (w2 + 4.0 * x * x));
    lv.d_width = mixing * dg_dw + (1.0 - mixing) * dl_dw;
    lv.d_mixing = g - l;
    return lv;
}

// Metal line: pseudo-Voigt convolved with exp(-s/lambda)/lambda on s >= 0,
// tail toward higher binding energy.  Exactly the symmetric shape at
// asymmetry = 0.
LineValue line_shape(double x, double width, double mixing, double asym) {
    if (asym < 1e-12) return pseudo_voigt(x, width, mixing);
    const double lambda = asym * width;
    const LaguerreRule& rule = laguerre();
    LineValue acc;
    double d_lambda = 0.0;
    for (int k = 0; k < kLaguerreNodes; ++k) {
        const double shift = lambda * rule.nodes(k);
        const LineValue lv = pseudo_voigt(x - shift, width, mixing);
        const double wk = rule.weights(k);
        acc.value += wk * lv.value;
        acc.d_x += wk * lv.d_x;
        acc.d_width += wk * lv.d_width;
        acc.d_mixing += wk * lv.d_mixing;
        d_lambda += wk * lv.d_x * (-rule.nodes(k));
    }
    acc.d_asym = d_lambda * width;
    acc.d_width += d_lambda * asym;
    return acc;
}

struct DoubletValue {
    double value = 0.0;
    double d_position = 0.0;
    double d_area = 0.0;
    double d_width = 0.0;
    double d_mixing = 0.0;
    double d_asym = 0.0;
};

DoubletValue doublet_with_partials(const DoubletComponent& c, double e) {
    const double x1 = e - c.position_5_2;
    const double x2 = e - (c.position_5_2 + c.splitting);
    const LineValue a = line_shape(x1, c.width, c.mixing, c.asymmetry);
    const LineValue b = line_shape(x2, c.width, c.mixing, c.asymmetry);

    DoubletValue d;
    const double s52 = kAreaFraction52, s32 = 1.0 - kAreaFraction52;
    d.d_area = s52 * a.value + s32 * b.value;
    d.value = c.area_total * d.d_area;
    d.d_position = -c.area_total * (s52 * a.d_x + s32 * b.d_x);
    d.d_width = c.area_total * (s52 * a.d_width + s32 * b.d_width);
    d.d_mixing = c.area_total * (s52 * a.d_mixing + s32 * b.d_mixing);
    d.d_asym = c.area_total * (s52 * a.d_asym + s32 * b.d_asym);
    return d;
}

} // namespace

void Spectrum::validate(Eigen::Index min_points) const {
    require_domain(binding_energy_ev.size() == counts.size(),
                   "Spectrum: axis/counts length mismatch");
    require_domain(binding_energy_ev.size() >= min_points,
                   "Spectrum: need at least " + std::to_string(min_points) + " points");
    require_domain(binding_energy_ev.allFinite() && counts.allFinite(),
                   "Spectrum: samples must be finite");
    require_domain((counts >= 0).all(), "Spectrum: counts must be >= 0");
    const bool ascending = binding_energy_ev(1) > binding_energy_ev(0);
    for (Eigen::Index i = 1; i < binding_energy_ev.size(); ++i) {
        const double d = binding_energy_ev(i) - binding_energy_ev(i - 1);
        require_domain(ascending ? d > 0 : d < 0, "Spectrum: axis must be strictly monotone");
    }
}

NbSpecies species_from_string(const std::string& name) {
    if (name == "Nb2O5") return NbSpecies::Nb2O5;
    if (name == "NbO2") return NbSpecies::NbO2;
    if (name == "NbO") return NbSpecies::NbO;
    if (name == "NbOx") return NbSpecies::NbOx;
    if (name == "Nb" || name == "Nb-metal" || name == "NbMetal") return NbSpecies::NbMetal;
    throw ParseError("unknown Nb species '" + name + "'");
}

std::string to_string(NbSpecies species) {
    switch (species) {
        case NbSpecies::Nb2O5: return "Nb2O5";
        case NbSpecies::NbO2: return "NbO2";
        case NbSpecies::NbO: return "NbO";
        case NbSpecies::NbOx: return "NbOx";
        case NbSpecies::NbMetal: return "Nb-metal";
    }
    return "?";
}

void DoubletComponent::validate() const {
    require_domain(splitting == kSpinOrbitSplittingEv,
                   "DoubletComponent: spin-orbit splitting is fixed at 2.75 eV");
    require_domain(area_total >= 0, "DoubletComponent: area must be >= 0");
    require_domain(width > 0, "DoubletComponent: width must be > 0");
    require_domain(mixing >= 0 && mixing <= 1, "DoubletComponent: mixing must be in [0, 1]");
    require_domain(asymmetry >= 0, "DoubletComponent: asymmetry must be >= 0");
    if (species != NbSpecies::NbMetal)
        require_domain(asymmetry == 0, "DoubletComponent: oxide lines are symmetric");
}

double model_doublet(const DoubletComponent& c, double e_ev) {
    c.validate();
    return doublet_with_partials(c, e_ev).value;
}

Eigen::ArrayXd model_doublet(const DoubletComponent& c, const Eigen::ArrayXd& e_ev) {
    c.validate();
    Eigen::ArrayXd out(e_ev.size());
    for (Eigen::Index i = 0; i < e_ev.size(); ++i)
        out(i) = doublet_with_partials(c, e_ev(i)).value;
    return out;
}

Eigen::ArrayXd shirley_background(const Eigen::ArrayXd& energy, const Eigen::ArrayXd& counts,
                                  int iterations, double tolerance) {
    const Eigen::Index n = energy.size();
    require_domain(n >= 4 && counts.size() == n, "shirley_background: need matching arrays");
    const Eigen::Index edge = std::max<Eigen::Index>(3, n / 50);
    const double b_lo = counts.head(edge).mean();
    const double b_hi = counts.tail(edge).mean();

    Eigen::ArrayXd bg = Eigen::ArrayXd::Constant(n, b_lo);
    for (int it = 0; it < iterations; ++it) {
        // Cumulative trapezoid of counts minus current background.
        Eigen::ArrayXd cum(n);
        cum(0) = 0.0;
        for (Eigen::Index i = 1; i < n; ++i) {
            const double seg = 0.5 * ((counts(i) - bg(i)) + (counts(i - 1) - bg(i - 1))) *
                               (energy(i) - energy(i - 1));
            cum(i) = cum(i - 1) + seg;
        }
        const double total = cum(n - 1);
        Eigen::ArrayXd next(n);
        for (Eigen::Index i = 0; i < n; ++i)
            next(i) = b_lo + (b_hi - b_lo) * (total != 0.0 ? cum(i) / total : 0.0);
        const double change = (next - bg).abs().maxCoeff();
        bg = next;
        if (change < tolerance * std::max(1.0, std::abs(b_hi - b_lo))) break;
    }
    return bg;
}

XpsFitResult fit_nb3d(const Spectrum& s, const std::vector<NbSpecies>& species,
                      const XpsFitOptions& options) {
    s.validate();
    require_domain(!species.empty(), "fit_nb3d: species set must be non-empty");
    {
        std::set<NbSpecies> uniq(species.begin(), species.end());
        require_domain(uniq.size() == species.size(), "fit_nb3d: duplicate species");
    }

    // Work on an ascending axis.
    Eigen::ArrayXd e = s.binding_energy_ev;
    Eigen::ArrayXd y = s.counts;
    if (e(1) < e(0)) {
        e.reverseInPlace();
        y.reverseInPlace();
    }
    const Eigen::Index n = e.size();
    const double e_min = e(0), e_max = e(n - 1);

    const XpsReferences& refs = options.references;
    for (NbSpecies sp : species) {
        const double pos = refs.position_5_2_ev.at(sp);
        if (pos - 1.5 < e_min || pos + kSpinOrbitSplittingEv + 1.5 > e_max)
            throw DomainError("fit_nb3d: window too narrow to cover the " + to_string(sp) +
                              " doublet");
    }

    Eigen::ArrayXd shirley = Eigen::ArrayXd::Zero(n);
    if (options.background == BackgroundKind::Shirley) {
        shirley = shirley_background(e, y);
        y -= shirley;
    }

    const double e_center = 0.5 * (e_min + e_max);
    const std::size_t ns = species.size();
    const bool has_metal =
        std::find(species.begin(), species.end(), NbSpecies::NbMetal) != species.end();
    // Layout: per species (position, area, width, mixing), then metal
    // asymmetry if present, then background intercept and slope.
    const int np = static_cast<int>(4 * ns) + (has_metal ? 1 : 0) + 2;
    const int asym_idx = static_cast<int>(4 * ns);
    const int bg_idx = asym_idx + (has_metal ? 1 : 0);

    const auto make_components = [&](const Eigen::VectorXd& p) {
        std::vector<DoubletComponent> comps(ns);
        for (std::size_t k = 0; k < ns; ++k) {
            DoubletComponent& c = comps[k];
            c.species = species[k];
            c.position_5_2 = p(static_cast<Eigen::Index>(4 * k));
            c.area_total = p(static_cast<Eigen::Index>(4 * k + 1));
            c.width = p(static_cast<Eigen::Index>(4 * k + 2));
            c.mixing = std::clamp(p(static_cast<Eigen::Index>(4 * k + 3)), 0.0, 1.0);
            c.asymmetry = (c.species == NbSpecies::NbMetal) ? p(asym_idx) : 0.0;
        }
        return comps;
    };

    fit::FitProblem problem;
    problem.residual = [&, e, y](const Eigen::VectorXd& p) {
        const auto comps = make_components(p);
        Eigen::VectorXd r(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            double v = p(bg_idx) + p(bg_idx + 1) * (e(i) - e_center);
            for (const auto& c : comps) v += doublet_with_partials(c, e(i)).value;
            r(i) = v - y(i);
        }
        return r;
    };
    problem.jacobian = [&, e](const Eigen::VectorXd& p) {
        const auto comps = make_components(p);
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, np);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < ns; ++k) {
                const DoubletValue d = doublet_with_partials(comps[k], e(i));
                jac(i, static_cast<Eigen::Index>(4 * k)) = d.d_position;
                jac(i, static_cast<Eigen::Index>(4 * k + 1)) = d.d_area;
                jac(i, static_cast<Eigen::Index>(4 * k + 2)) = d.d_width;
                jac(i, static_cast<Eigen::Index>(4 * k + 3)) = d.d_mixing;
                if (comps[k].species == NbSpecies::NbMetal) jac(i, asym_idx) += d.d_asym;
            }
            jac(i, bg_idx) = 1.0;
            jac(i, bg_idx + 1) = e(i) - e_center;
        }
        return jac;
    };

    // Seeds: reference positions, default shapes; areas from a linear solve
    // against unit shapes plus background columns.
    Eigen::VectorXd initial(np), lower(np), upper(np);
    {
        Eigen::MatrixXd design(n, static_cast<Eigen::Index>(ns) + 2);
        for (std::size_t k = 0; k < ns; ++k) {
            DoubletComponent c;
            c.species = species[k];
            c.position_5_2 = refs.position_5_2_ev.at(species[k]);
            c.area_total = 1.0;
            c.width = 1.2;
            c.mixing = 0.7;
            c.asymmetry = c.species == NbSpecies::NbMetal ? 0.2 : 0.0;
            for (Eigen::Index i = 0; i < n; ++i)
                design(i, static_cast<Eigen::Index>(k)) = doublet_with_partials(c, e(i)).value;
        }
        design.col(static_cast<Eigen::Index>(ns)).setOnes();
        design.col(static_cast<Eigen::Index>(ns) + 1) = (e - e_center).matrix();
        const Eigen::VectorXd seed = design.colPivHouseholderQr().solve(y.matrix());

        const double scale = std::max((y.maxCoeff() - y.minCoeff()) * (e_max - e_min), 1e-12);
        for (std::size_t k = 0; k < ns; ++k) {
            const double ref = refs.position_5_2_ev.at(species[k]);
            initial(static_cast<Eigen::Index>(4 * k)) = ref;
            initial(static_cast<Eigen::Index>(4 * k + 1)) =
                std::max(seed(static_cast<Eigen::Index>(k)), 1e-4 * scale);
            initial(static_cast<Eigen::Index>(4 * k + 2)) = 1.2;
            initial(static_cast<Eigen::Index>(4 * k + 3)) = 0.7;
            lower(static_cast<Eigen::Index>(4 * k)) = ref - refs.position_halfwindow_ev;
            lower(static_cast<Eigen::Index>(4 * k + 1)) = 0.0;
            lower(static_cast<Eigen::Index>(4 * k + 2)) = refs.width_min_ev;
            lower(static_cast<Eigen::Index>(4 * k + 3)) = 0.0;
            upper(static_cast<Eigen::Index>(4 * k)) = ref + refs.position_halfwindow_ev;
            upper(static_cast<Eigen::Index>(4 * k + 1)) =
                std::numeric_limits<double>::infinity();
            upper(static_cast<Eigen::Index>(4 * k + 2)) = refs.width_max_ev;
            upper(static_cast<Eigen::Index>(4 * k + 3)) = 1.0;
        }
        if (has_metal) {
            initial(asym_idx) = 0.2;
            lower(asym_idx) = 0.0;
            upper(asym_idx) = 2.0;
        }
        initial(bg_idx) = seed(static_cast<Eigen::Index>(ns));
        initial(bg_idx + 1) = seed(static_cast<Eigen::Index>(ns) + 1);
        lower(bg_idx) = -std::numeric_limits<double>::infinity();
        lower(bg_idx + 1) = -std::numeric_limits<double>::infinity();
        upper(bg_idx) = std::numeric_limits<double>::infinity();
        upper(bg_idx + 1) = std::numeric_limits<double>::infinity();
    }
    problem.initial = initial;
    problem.lower = lower;
    problem.upper = upper;
    problem.max_iterations = options.solve.max_iterations;
    problem.tolerance = options.solve.tolerance;

    XpsFitResult out;
    out.fit = fit::solve_least_squares(problem);
    out.components = make_components(out.fit.parameters);
    out.background_intercept = out.fit.parameters(bg_idx);
    out.background_slope = out.fit.parameters(bg_idx + 1);

    out.background.resize(s.binding_energy_ev.size());
    for (Eigen::Index i = 0; i < s.binding_energy_ev.size(); ++i)
        out.background(i) = out.background_intercept +
                            out.background_slope * (s.binding_energy_ev(i) - e_center);
    if (options.background == BackgroundKind::Shirley) {
        Eigen::ArrayXd sh = shirley;
        if (s.binding_energy_ev(1) < s.binding_energy_ev(0)) sh.reverseInPlace();
        out.background += sh;
    }

    // Energy alignment: Nb2O5 anchors the binding-energy scale.
    for (const auto& c : out.components) {
        if (c.species == NbSpecies::Nb2O5) {
            out.alignment_shift_ev = refs.position_5_2_ev.at(NbSpecies::Nb2O5) - c.position_5_2;
            break;
        }
    }
    if (out.alignment_shift_ev != 0.0)
        for (auto& c : out.components) c.position_5_2 += out.alignment_shift_ev;

    return out;
}

CompositionReport composition(const std::vector<DoubletComponent>& components) {
    require_domain(!components.empty(), "composition: need at least one component");
    double total = 0.0;
    for (const auto& c : components) {
        require_domain(c.area_total >= 0, "composition: negative area");
        total += c.area_total;
    }
    require_domain(total > 0, "composition: all component areas are zero");

    CompositionReport report;
    report.entries.reserve(components.size());
    double fsum = 0.0;
    for (const auto& c : components) {
        const double frac = 100.0 * c.area_total / total;
        report.entries.push_back({c.species, frac, c.area_total});
        fsum += frac;
    }
    // Renormalize out the last-ulp drift so fractions sum to 100 exactly.
    if (fsum != 100.0 && fsum > 0.0)
        for (auto& entry : report.entries) entry.fraction_pct *= 100.0 / fsum;
    return report;
}

} // namespace cavchar::xps
