#include "fixtures.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unistd.h>

namespace fixtures {

namespace {

std::string id(const char* prefix, int value, int width)
{
    std::ostringstream s;
    s << prefix << std::setw(width) << std::setfill('0') << value;
    return s.str();
}

std::ofstream open(const std::filesystem::path& csv)
{
    std::ofstream out(csv, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write fixture " + csv.string());
    out << std::setprecision(17);
    return out;
}

const char* status_label(double u)
{
    if (u < 0.31) return "excellent";
    if (u < 0.75) return "very good";
    return "a little trouble";
}

double status_effect(const std::string& label)
{
    if (label == "very good") return 3.3;
    if (label == "a little trouble") return 10.3;
    return 0.0;
}

} // namespace

TempDir::TempDir(const std::string& tag)
{
    static std::atomic<int> counter{0};
    const auto base = std::filesystem::temp_directory_path();
    path_ = base / ("evalguard_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir()
{
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

FixtureTruth write_planted_fixture(const std::filesystem::path& csv, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u;
    FixtureTruth truth;
    auto out = open(csv);
    out << "participant,evaluator,outcome,age,status\n";
    int participant = 0;
    for (int j = 1; j <= 12; ++j) {
        const std::string ev = id("E", j, 2);
        truth.evaluator_ids.push_back(ev);
        const double beta = 40.0 + (ev == "E07" ? 10.0 : 0.0);
        for (int k = 0; k < 30; ++k) {
            const double age = 50 + 5 * z(rng);
            const std::string status = status_label(u(rng));
            const double y = beta + 0.4 * age + status_effect(status) + 2.0 * z(rng);
            out << id("P", ++participant, 4) << ',' << ev << ',' << y << ',' << age << ",\"" << status << "\"\n";
        }
    }
    truth.planted = {"E07"};
    truth.shift = {10.0};
    return truth;
}

FixtureTruth write_null_fixture(const std::filesystem::path& csv, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    FixtureTruth truth;
    auto out = open(csv);
    out << "participant,evaluator,outcome,age\n";
    int participant = 0;
    for (int j = 1; j <= 10; ++j) {
        const std::string ev = id("N", j, 2);
        truth.evaluator_ids.push_back(ev);
        for (int k = 0; k < 20; ++k) {
            const double age = 40 + 10 * z(rng);
            out << id("Q", ++participant, 4) << ',' << ev << ',' << 25.0 + 0.5 * age + 1e-3 * z(rng) << ','
                << age << '\n';
        }
    }
    return truth;
}

FixtureTruth write_paired_fixture(const std::filesystem::path& csv, double rho, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    FixtureTruth truth;
    auto out = open(csv);
    out << "participant,evaluator,repeat,outcome,age\n";
    int participant = 0;
    for (int j = 1; j <= 15; ++j) {
        const std::string ev = id("G", j, 2);
        truth.evaluator_ids.push_back(ev);
        for (int k = 0; k < 40; ++k) {
            const std::string pid = id("R", ++participant, 4);
            const double age = 55 + 4 * z(rng);
            const double mean = 30.0 + 0.2 * j + 0.5 * age;
            const double z1 = z(rng);
            const double z2 = rho * z1 + std::sqrt(1 - rho * rho) * z(rng);
            out << pid << ',' << ev << ",1," << mean + 3 * z1 << ',' << age << '\n';
            out << pid << ',' << ev << ",2," << mean + 3 * z2 << ',' << age << '\n';
        }
    }
    return truth;
}

FixtureTruth write_audiology_fixture(const std::filesystem::path& csv, std::uint64_t seed)
{
    constexpr int M = 68;
    constexpr int N = 3568;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u;

    // Unequal caseloads summing to N.
    std::vector<int> sizes(M);
    int total = 0;
    for (int j = 0; j < M; ++j) {
        sizes[static_cast<std::size_t>(j)] = 40 + (j * 17) % 26;
        total += sizes[static_cast<std::size_t>(j)];
    }
    for (int j = 0; total != N; j = (j + 1) % M) {
        const int step = total < N ? 1 : -1;
        sizes[static_cast<std::size_t>(j)] += step;
        total += step;
    }

    FixtureTruth truth;
    truth.planted = {"A04", "A13", "A48"};
    truth.shift = {13.0, 14.0, -13.0};
    auto out = open(csv);
    out << "subject_id,audiologist,ear,threshold_db,age,age_sq,hearing_status,right_ear\n";
    int subject = 0;
    for (int j = 1; j <= M; ++j) {
        const std::string aud = id("A", j, 2);
        truth.evaluator_ids.push_back(aud);
        double effect = 0.8 * z(rng);
        for (std::size_t p = 0; p < truth.planted.size(); ++p) {
            if (truth.planted[p] == aud) effect = truth.shift[p];
        }
        for (int k = 0; k < sizes[static_cast<std::size_t>(j - 1)]; ++k) {
            const std::string sid = id("S", ++subject, 5);
            const double age = 56.6 + 4.4 * z(rng);
            const std::string status = status_label(u(rng));
            const double mean = 110.0 + effect - 2.7 * age + 0.03 * age * age + status_effect(status);
            const double shared = 8.0 * z(rng);
            for (int ear = 1; ear <= 2; ++ear) {
                const double y = mean + (ear == 2 ? 1.0 : 0.0) + shared + 5.0 * z(rng);
                out << sid << ',' << aud << ',' << ear << ',' << y << ',' << age << ',' << age * age << ",\"" << status << "\","
                    << (ear == 1 ? 1 : 0) << '\n';
            }
        }
    }
    return truth;
}

} // namespace fixtures
