// SPDX-License-Identifier: Apache-2.0
//
// nrpos: 5G NR positioning signals, measurements and solvers
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "nrpos/channel.hpp"
#include "nrpos/config_io.hpp"
#include "nrpos/measurements.hpp"
#include "nrpos/prs.hpp"
#include "nrpos/records.hpp"
#include "nrpos/scenario.hpp"
#include "nrpos/solvers.hpp"
#include "nrpos/srs.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nrpos
{

// Presets: "uma", "umi", "ioo-fr1", "ioo-fr2".
const std::vector<std::string> &preset_names();

struct ExperimentConfig
{
    std::string preset = "ioo-fr1";
    ScenarioKind scenario = ScenarioKind::ioo;
    FrequencyRange fr = FrequencyRange::fr1;
    Method method = Method::dl_tdoa;
    int n_drops = 100;
    std::uint64_t seed = 1;
    int threads = 1;
    bool interference = true;
    bool hull_split = false;
    // No noise, ideal single-tap LOS channel, solver fed unquantised values.
    bool noiseless = false;

    // Deployment
    int scs_khz = 30;
    int n_prb = 272;
    double carrier_hz = 2e9;
    std::optional<double> tx_power_dbm;  // TRP total power; scenario default when empty
    std::optional<DropRegion> drop_region;
    Vec2 origin = Vec2::Zero();
    std::optional<Deployment> deployment;  // inline deployment replaces the scenario builder

    // Signals and measurements
    int dl_comb = 12;
    int dl_symbols = 12;
    int ul_comb = 2;
    int ul_symbols = 2;
    int timing_k = 2;
    double ue_tx_power_dbm = 23.0;
    double dl_noise_figure_db = ue_noise_figure_db;
    double ul_noise_figure_db = trp_noise_figure_db;
    double sync_error_std_s = 0.0;       // inter-TRP synchronisation error
    double ue_clock_offset_max_s = 0.5e-6;
    ToaOptions toa;

    ChannelParams channel = default_channel_params(ScenarioKind::ioo);
    SolverOptions solver;

    // UL-AoA
    AntennaArray array{4, 4};
    std::optional<double> aoa_snr_db;
    int aoa_snapshots = 8;

    // DL-AoD beam grid
    int aod_beams = 8;

    void validate() const;
};

ExperimentConfig preset_config(const std::string &name);

json encode(const ExperimentConfig &cfg);
// Starts from the preset named in the document (default "ioo-fr1") and
// applies every field present. Throws ConfigError with the offending path.
ExperimentConfig decode_experiment_config(const json &j);

struct DropOutcome
{
    int ue_id = 0;
    Vec3 truth = Vec3::Zero();
    std::optional<PositionFix> fix;
    std::string failure;  // why no fix was produced
    bool in_hull = false;
    double gdop = 0.0;
    std::vector<MeasurementRecord> records;

    double horizontal_error() const;
    double vertical_error() const;
};

// Builds the deployment, reference signals and per-drop measurements of an
// experiment. All randomness comes from substreams of the master seed keyed
// by drop and TRP, so any drop can be reproduced in isolation.
class Simulator
{
public:
    explicit Simulator(ExperimentConfig cfg);

    const ExperimentConfig &config() const { return cfg_; }
    const Deployment &deployment() const { return dep_; }
    const PrsConfigTree &prs_config() const { return prs_; }
    const SrsPosResource &srs_config() const { return srs_; }
    const std::vector<Vec3> &ue_positions() const { return ues_; }
    const std::vector<Vec2> &hull() const { return hull_; }
    AnchorMap anchors() const;
    SolverOptions solver_options() const;
    RecordPayload payload() const { return cfg_.noiseless ? RecordPayload::raw : RecordPayload::quantized; }

    struct Measurements
    {
        std::vector<MeasurementRecord> ue;                   // reported over LPP
        std::map<int, std::vector<MeasurementRecord>> gnb;   // reported over NRPPa, per TRP
        std::vector<MeasurementRecord> all() const;
    };
    Measurements measure(int drop) const;
    std::vector<LinkRealization> links(int drop) const;

    DropOutcome run_drop(int drop) const;

private:
    struct DropState;
    DropState prepare(int drop) const;
    void measure_dl_timing(const DropState &s, Measurements &m) const;
    void measure_ul_timing(const DropState &s, Measurements &m) const;
    void measure_aoa(const DropState &s, Measurements &m) const;
    void measure_aod(const DropState &s, Measurements &m) const;
    TimingReport quantize(double t) const;

    ExperimentConfig cfg_;
    Deployment dep_;
    PrsConfigTree prs_;
    SrsPosResource srs_;
    std::vector<DlPrsResource> trp_resources_;
    std::vector<ResourceGrid> prs_grids_;
    std::vector<ReferenceSignal> prs_refs_;
    ResourceGrid srs_grid_;
    ReferenceSignal srs_ref_;
    std::vector<Vec3> ues_;
    std::vector<Vec2> hull_;
};

struct ResultSummary
{
    std::map<int, double> percentiles;  // 50, 67, 90, 95 -> horizontal error (m)
    int n_drops = 0;
    int n_converged = 0;
    int n_failed = 0;
    double runtime_s = 0.0;
    // With hull_split: statistics of drops inside / outside the TRP hull.
    std::optional<double> median_inside;
    std::optional<double> median_outside;
    std::optional<double> mean_gdop_inside;
    std::optional<double> mean_gdop_outside;
    int n_inside = 0;
    int n_outside = 0;
};

struct ExperimentResult
{
    ResultSummary summary;
    std::vector<DropOutcome> drops;
};

// Linear interpolation between order statistics; p in [0, 100].
double percentile(std::vector<double> values, double p);

ExperimentResult run_experiment(const ExperimentConfig &cfg);

std::string results_csv(const ExperimentResult &r);
std::string cdf_csv(const ExperimentResult &r);
json summary_json(const ExperimentResult &r, const ExperimentConfig &cfg);
// Writes results.csv, cdf.csv, summary.json and measurements.jsonl.
void write_artifacts(const ExperimentResult &r, const ExperimentConfig &cfg, const std::filesystem::path &out_dir);

// Per-percentile b - a. Flags mismatched drop counts or seeds.
json compare_runs(const json &summary_a, const json &summary_b);

} // namespace nrpos
