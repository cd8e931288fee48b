#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cavchar/fit.hpp"

// Constrained Nb 3d spin-orbit doublet deconvolution.  The 3:2 area ratio and
// the 2.75 eV splitting are built into the line-shape parameterization, never
// enforced by penalty.
namespace cavchar::xps {

struct Spectrum {
    Eigen::ArrayXd binding_energy_ev;  // monotone axis, either direction
    Eigen::ArrayXd counts;
    std::string pass_metadata;

    void validate(Eigen::Index min_points = 50) const;
};

enum class NbSpecies { Nb2O5, NbO2, NbO, NbOx, NbMetal };

NbSpecies species_from_string(const std::string& name);
std::string to_string(NbSpecies species);

inline constexpr double kSpinOrbitSplittingEv = 2.75;
inline constexpr double kAreaFraction52 = 0.6;  // 3d5/2 : 3d3/2 = 3 : 2

struct DoubletComponent {
    NbSpecies species = NbSpecies::Nb2O5;
    double position_5_2 = 0.0;              // eV, 3d5/2 center
    double splitting = kSpinOrbitSplittingEv;
    double area_total = 0.0;                // counts * eV over both lines
    double width = 1.0;                     // FWHM, eV
    double mixing = 0.5;                    // Gaussian fraction in [0, 1]
    double asymmetry = 0.0;                 // metal only; exponential tail scale / width

    void validate() const;
};

// Counts at binding energy e; unit-area pseudo-Voigt lines, metal lines
// convolved with a one-sided exponential tail toward higher binding energy.
double model_doublet(const DoubletComponent& c, double e_ev);
Eigen::ArrayXd model_doublet(const DoubletComponent& c, const Eigen::ArrayXd& e_ev);

enum class BackgroundKind { Linear, Shirley };

struct XpsReferences {
    std::map<NbSpecies, double> position_5_2_ev = {
        {NbSpecies::NbMetal, 202.2}, {NbSpecies::NbOx, 203.1}, {NbSpecies::NbO, 203.8},
        {NbSpecies::NbO2, 206.1},    {NbSpecies::Nb2O5, 207.5}};
    double position_halfwindow_ev = 0.5;
    double width_min_ev = 0.5;
    double width_max_ev = 3.0;
};

struct XpsFitOptions {
    BackgroundKind background = BackgroundKind::Linear;
    XpsReferences references;
    fit::SolveOptions solve;

};

struct XpsFitResult {
    std::vector<DoubletComponent> components;
    double background_intercept = 0.0;  // counts at window center
    double background_slope = 0.0;      // counts per eV
    Eigen::ArrayXd background;          // per input point (includes Shirley part)
    double alignment_shift_ev = 0.0;    // applied so Nb2O5 3d5/2 lands on its reference
    fit::FitResult fit;
};

XpsFitResult fit_nb3d(const Spectrum& s, const std::vector<NbSpecies>& species,
                      const XpsFitOptions& options = {});

struct CompositionEntry {
    NbSpecies species;
    double fraction_pct;
    double area;
};

struct CompositionReport {
    std::vector<CompositionEntry> entries;  // fractions sum to exactly 100
};

CompositionReport composition(const std::vector<DoubletComponent>& components);

// Shirley background for a spectrum segment; exposed for tests and tooling.
Eigen::ArrayXd shirley_background(const Eigen::ArrayXd& energy, const Eigen::ArrayXd& counts,
                                  int iterations = 10, double tolerance = 1e-6);

} // namespace cavchar::xps
