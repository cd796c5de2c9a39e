#include <gtest/gtest.h>

#include "fusednet/solver/model.hpp"

namespace {

// Every fit returned while the suite runs must be certified at 1e-6.
class KktEnvironment : public ::testing::Environment {
public:
    void TearDown() override {
        const auto& m = fusednet::fit_monitor();
        EXPECT_LE(m.max_kkt(), 1e-6) << "a returned fit exceeded the KKT tolerance";
        EXPECT_LE(m.max_tol(), 1e-6) << "a fit was requested with a tolerance looser than 1e-6";
    }
};

}  // namespace

int main(int argc, char** argv) {
    ::testing::InitGoogleTest(&argc, argv);
    ::testing::AddGlobalTestEnvironment(new KktEnvironment);
    return RUN_ALL_TESTS();
}
