#include "shelab/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "shelab/errors.hpp"

namespace shelab {

namespace {

namespace pt = boost::property_tree;

// Line of the first "key =" inside [section], for error messages.
int line_of(const std::string& text, const std::string& section, const std::string& key) {
    std::istringstream in(text);
    std::string line, current;
    for (int n = 1; std::getline(in, line); ++n) {
        auto b = line.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        line = line.substr(b);
        if (line[0] == '[') {
            current = line.substr(1, line.find(']') - 1);
        } else if (current == section && line.compare(0, key.size(), key) == 0) {
            auto rest = line.substr(key.size());
            auto r = rest.find_first_not_of(" \t");
            if (r != std::string::npos && rest[r] == '=') return n;
        }
    }
    return 0;
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        std::size_t used = 0;
        out.push_back(std::stod(item, &used));
        if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    }
    return out;
}

template <class T>
T parse_value(const std::string& s);

template <>
double parse_value<double>(const std::string& s) {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (s.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(s);
    return v;
}

template <>
int parse_value<int>(const std::string& s) {
    std::size_t used = 0;
    int v = std::stoi(s, &used);
    if (s.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(s);
    return v;
}

// accepts plain integers and integral values written like 1e5
template <>
std::uint64_t parse_value<std::uint64_t>(const std::string& s) {
    std::size_t used = 0;
    if (s.find_first_of(".eE") == std::string::npos) {
        if (s.find('-') != std::string::npos) throw std::invalid_argument(s);
        unsigned long long v = std::stoull(s, &used);
        if (s.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(s);
        return v;
    }
    double v = parse_value<double>(s);
    if (v < 0 || v != std::floor(v) || v > 9.0e15) throw std::invalid_argument(s);
    return static_cast<std::uint64_t>(v);
}

template <>
bool parse_value<bool>(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw std::invalid_argument(s);
}

template <>
std::string parse_value<std::string>(const std::string& s) {
    return s;
}

template <>
std::vector<double> parse_value<std::vector<double>>(const std::string& s) {
    return parse_list(s);
}

using Setter = std::function<void(Config&, const std::string&)>;

template <class Group, class T>
Setter field(Group Config::*group, T Group::*member) {
    return [group, member](Config& c, const std::string& v) { (c.*group).*member = parse_value<T>(v); };
}

const std::map<std::string, std::map<std::string, Setter>>& schema() {
    static const std::map<std::string, std::map<std::string, Setter>> s = {
        {"grid",
         {{"n_mu", field(&Config::grid, &GridConfig::n_mu)},
          {"n_phi", field(&Config::grid, &GridConfig::n_phi)},
          {"n_x", field(&Config::grid, &GridConfig::n_x)},
          {"n_y", field(&Config::grid, &GridConfig::n_y)},
          {"n_z", field(&Config::grid, &GridConfig::n_z)},
          {"L_y", field(&Config::grid, &GridConfig::L_y)},
          {"L_z", field(&Config::grid, &GridConfig::L_z)},
          {"n_eps", field(&Config::grid, &GridConfig::n_eps)},
          {"eps_max", field(&Config::grid, &GridConfig::eps_max)}}},
        {"physics",
         {{"B", field(&Config::physics, &PhysicsConfig::B)},
          {"B_modulation", field(&Config::physics, &PhysicsConfig::B_modulation)},
          {"kernel", field(&Config::physics, &PhysicsConfig::kernel)},
          {"kernel_anisotropy", field(&Config::physics, &PhysicsConfig::kernel_anisotropy)},
          {"kernel_eta", field(&Config::physics, &PhysicsConfig::kernel_eta)},
          {"alphas", field(&Config::physics, &PhysicsConfig::alphas)},
          {"epsilon", field(&Config::physics, &PhysicsConfig::epsilon)},
          {"E0", field(&Config::physics, &PhysicsConfig::E0)},
          {"frozen_field", field(&Config::physics, &PhysicsConfig::frozen_field)},
          {"doping", field(&Config::physics, &PhysicsConfig::doping)},
          {"doping_value", field(&Config::physics, &PhysicsConfig::doping_value)},
          {"init_amplitude", field(&Config::physics, &PhysicsConfig::init_amplitude)},
          {"init_temperature", field(&Config::physics, &PhysicsConfig::init_temperature)}}},
        {"run",
         {{"t_final", field(&Config::run, &RunConfig::t_final)},
          {"dt", field(&Config::run, &RunConfig::dt)},
          {"c_safe", field(&Config::run, &RunConfig::c_safe)},
          {"snapshot_every", field(&Config::run, &RunConfig::snapshot_every)},
          {"seed", field(&Config::run, &RunConfig::seed)},
          {"particles", field(&Config::run, &RunConfig::particles)},
          {"mode", field(&Config::run, &RunConfig::mode)},
          {"kinetic_dt", field(&Config::run, &RunConfig::kinetic_dt)},
          {"workers", field(&Config::run, &RunConfig::workers)},
          {"neutralize", field(&Config::run, &RunConfig::neutralize)},
          {"msd_t_final", field(&Config::run, &RunConfig::msd_t_final)},
          {"msd_particles", field(&Config::run, &RunConfig::msd_particles)},
          {"compare_y_bins", field(&Config::run, &RunConfig::compare_y_bins)},
          {"compare_eps_bins", field(&Config::run, &RunConfig::compare_eps_bins)},
          {"reduced_t_final", field(&Config::run, &RunConfig::reduced_t_final)}}},
        {"output", {{"dir", [](Config& c, const std::string& v) { c.output_dir = v; }}}},
    };
    return s;
}

void check(bool ok, const std::string& what) {
    if (!ok) throw ConfigurationError("invalid configuration: " + what);
}

}  // namespace

Config parse_config(const std::string& text, const std::string& source) {
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigurationError(source + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    Config config;
    const auto& sch = schema();
    for (const auto& [section, body] : tree) {
        auto sec = sch.find(section);
        if (sec == sch.end() || (body.empty() && !body.data().empty()))
            throw ConfigurationError(source + ": unknown section or top-level key '" + section + "'");
        for (const auto& [key, value] : body) {
            int line = line_of(text, section, key);
            std::string where = source + ":" + std::to_string(line);
            auto it = sec->second.find(key);
            if (it == sec->second.end())
                throw ConfigurationError(where + ": unknown key '" + key + "' in section [" + section + "]");
            try {
                it->second(config, value.get_value<std::string>());
            } catch (const std::invalid_argument&) {
                throw ConfigurationError(where + ": cannot parse value '" + value.get_value<std::string>() +
                                         "' for key '" + key + "'");
            } catch (const std::out_of_range&) {
                throw ConfigurationError(where + ": value out of range for key '" + key + "'");
            }
        }
    }
    validate(config);
    return config;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigurationError("cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.string());
}

void validate(const Config& c) {
    const auto& g = c.grid;
    check(g.n_mu >= 2 && g.n_mu % 2 == 0, "grid.n_mu must be an even integer >= 2");
    check(g.n_phi >= 4 && g.n_phi % 2 == 0, "grid.n_phi must be an even integer >= 4");
    check(g.n_x >= 2, "grid.n_x must be at least 2");
    check(g.n_y >= 1 && g.n_z >= 1, "grid.n_y and grid.n_z must be positive");
    check(g.L_y > 0 && g.L_z > 0, "box lengths must be positive");
    check(g.n_eps >= 2, "grid.n_eps must be at least 2");
    check(g.eps_max > 0, "grid.eps_max must be positive");
    const auto& p = c.physics;
    check(std::isfinite(p.B), "physics.B must be finite");
    check(std::abs(p.B_modulation) < 1, "physics.B_modulation must lie in (-1, 1)");
    check(p.kernel == "isotropic" || p.kernel == "specular" || p.kernel == "custom" || p.kernel == "eta",
          "physics.kernel must be isotropic, specular, custom or eta");
    check(p.kernel_eta > 0, "physics.kernel_eta must be positive");
    check(!p.alphas.empty(), "physics.alphas must not be empty");
    for (double a : p.alphas)
        check(a > 0 && a <= 1, "alpha values must lie in (0, 1], got " + format_number(a));
    check(p.epsilon > 0, "physics.epsilon must be positive");
    check(p.doping == "matched" || p.doping == "uniform", "physics.doping must be matched or uniform");
    check(p.init_temperature > 0, "physics.init_temperature must be positive");
    check(std::abs(p.init_amplitude) <= 1, "physics.init_amplitude must lie in [-1, 1] so F_I >= 0");
    const auto& r = c.run;
    check(r.t_final >= 0, "run.t_final must be nonnegative");
    check(r.dt >= 0, "run.dt must be nonnegative");
    check(r.c_safe > 0 && r.c_safe <= 1, "run.c_safe must lie in (0, 1]");
    check(r.snapshot_every >= 1, "run.snapshot_every must be positive");
    check(r.particles >= 1, "run.particles must be positive");
    check(r.mode == "mc" || r.mode == "reduced" || r.mode == "mc-selfconsistent",
          "run.mode must be mc, reduced or mc-selfconsistent");
    check(r.kinetic_dt > 0, "run.kinetic_dt must be positive");
    check(r.workers >= 0, "run.workers must be nonnegative");
    check(r.msd_t_final > 0 && r.msd_particles >= 2, "MSD oracle settings must be positive");
    check(r.reduced_t_final > 0, "run.reduced_t_final must be positive");
    check(r.compare_y_bins >= 1 && r.compare_eps_bins >= 1, "comparison bins must be positive");
    check(g.n_y % r.compare_y_bins == 0, "run.compare_y_bins must divide grid.n_y");
    check(g.n_eps % r.compare_eps_bins == 0, "run.compare_eps_bins must divide grid.n_eps");
}

Json to_json(const Config& c) {
    Json j;
    j["grid"] = {{"n_mu", c.grid.n_mu}, {"n_phi", c.grid.n_phi}, {"n_x", c.grid.n_x},
                 {"n_y", c.grid.n_y},   {"n_z", c.grid.n_z},     {"L_y", c.grid.L_y},
                 {"L_z", c.grid.L_z},   {"n_eps", c.grid.n_eps}, {"eps_max", c.grid.eps_max}};
    j["physics"] = {{"B", c.physics.B},
                    {"B_modulation", c.physics.B_modulation},
                    {"kernel", c.physics.kernel},
                    {"kernel_anisotropy", c.physics.kernel_anisotropy},
                    {"kernel_eta", c.physics.kernel_eta},
                    {"alphas", c.physics.alphas},
                    {"epsilon", c.physics.epsilon},
                    {"E0", c.physics.E0},
                    {"frozen_field", c.physics.frozen_field},
                    {"doping", c.physics.doping},
                    {"doping_value", c.physics.doping_value},
                    {"init_amplitude", c.physics.init_amplitude},
                    {"init_temperature", c.physics.init_temperature}};
    j["run"] = {{"t_final", c.run.t_final},
                {"dt", c.run.dt},
                {"c_safe", c.run.c_safe},
                {"snapshot_every", c.run.snapshot_every},
                {"seed", c.run.seed},
                {"particles", c.run.particles},
                {"mode", c.run.mode},
                {"kinetic_dt", c.run.kinetic_dt},
                {"workers", c.run.workers},
                {"neutralize", c.run.neutralize},
                {"msd_t_final", c.run.msd_t_final},
                {"msd_particles", c.run.msd_particles},
                {"compare_y_bins", c.run.compare_y_bins},
                {"compare_eps_bins", c.run.compare_eps_bins},
                {"reduced_t_final", c.run.reduced_t_final}};
    j["output"] = {{"dir", c.output_dir.string()}};
    return j;
}

GridPtr make_sphere_grid(const Config& config) { return build_sphere_grid(config.grid.n_mu, config.grid.n_phi); }

std::shared_ptr<const BoundaryKernel> make_kernel(const Config& config, GridPtr grid) {
    const auto& p = config.physics;
    if (p.kernel == "specular") return std::make_shared<const BoundaryKernel>(make_specular_kernel(grid));
    if (p.kernel == "custom") {
        double a = p.kernel_anisotropy;
        return std::make_shared<const BoundaryKernel>(make_custom_kernel(
            [a](const Eigen::Vector3d& out, const Eigen::Vector3d& in) {
                return 1.0 / std::numbers::pi + a * out.y() * in.y();
            },
            grid));
    }
    BoundaryKernel iso = make_isotropic_kernel(grid);
    if (p.kernel == "eta") return std::make_shared<const BoundaryKernel>(make_eta_kernel(iso, p.kernel_eta));
    return std::make_shared<const BoundaryKernel>(std::move(iso));
}

}  // namespace shelab
