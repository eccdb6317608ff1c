#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "mi2sl/dataset.hpp"

using namespace mi2sl;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name, const std::string& content)
      : path("mi2sl_test_" + name) {
    std::ofstream out(path);
    out << content;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("dataset CSV round trip") {
  const TempFile f("data.csv",
                   "y,x1,x2,z2\n"
                   "1.5,0.25,-1,2\n"
                   "2,0.5,0,-3.5\n"
                   "0,1e2,4,0.125\n");
  const Dataset d = read_dataset_csv(f.path);
  CHECK(d.n() == 3);
  CHECK(d.columns == std::vector<std::string>{"y", "x1", "x2", "z2"});
  CHECK(d.column("y")[0] == 1.5);
  CHECK(d.column("x1")[2] == 100.0);
  CHECK(d.column("z2")[1] == -3.5);
  CHECK(d.column_index("x2") == 2);
  CHECK(d.column_index("missing") == -1);
  CHECK_THROWS_AS(d.column("missing"), ParseError);
}

TEST_CASE("dataset CSV tolerates CRLF and padded cells") {
  const TempFile f("crlf.csv", "a,b\r\n 1 ,\t2\r\n3,4\r\n");
  const Dataset d = read_dataset_csv(f.path);
  CHECK(d.n() == 2);
  CHECK(d.values(0, 0) == 1.0);
  CHECK(d.values(0, 1) == 2.0);
}

TEST_CASE("dataset CSV error reporting") {
  SUBCASE("missing file") {
    CHECK_THROWS_AS(read_dataset_csv("does_not_exist.csv"), ParseError);
  }
  SUBCASE("non-numeric cell names row and column") {
    const TempFile f("bad.csv", "a,b\n1,2\n1,oops\n");
    bool threw = false;
    try {
      read_dataset_csv(f.path);
    } catch (const ParseError& e) {
      threw = true;
      const std::string msg = e.what();
      CHECK(msg.find("'oops'") != std::string::npos);
      CHECK(msg.find("row 2") != std::string::npos);
      CHECK(msg.find("'b'") != std::string::npos);
    }
    CHECK(threw);
  }
  SUBCASE("ragged row") {
    const TempFile f("ragged.csv", "a,b\n1,2\n3\n");
    CHECK_THROWS_AS(read_dataset_csv(f.path), ParseError);
  }
  SUBCASE("empty file") {
    const TempFile f("empty.csv", "");
    CHECK_THROWS_AS(read_dataset_csv(f.path), ParseError);
  }
}

TEST_CASE("regression data assembly") {
  const TempFile f("assemble.csv",
                   "y,x1a,x1b,x2,z2\n"
                   "1,2,3,4,5\n"
                   "6,7,8,9,10\n"
                   "11,12,13,14,15\n");
  const Dataset d = read_dataset_csv(f.path);
  EstimationSpec spec;
  spec.outcome = "y";
  spec.endogenous = "x2";
  spec.exogenous = {"x1a", "x1b"};
  spec.instruments = {"z2"};

  const RegressionData rd = build_regression_data(d, spec);
  CHECK(rd.y[1] == 6.0);
  CHECK(rd.x2[2] == 14.0);
  CHECK(rd.X1.cols() == 2);
  CHECK(rd.X1(0, 1) == 3.0);
  CHECK(rd.Z2(2, 0) == 15.0);

  SUBCASE("missing column") {
    spec.exogenous = {"x1a", "nope"};
    CHECK_THROWS_AS(build_regression_data(d, spec), ParseError);
  }
  SUBCASE("empty instrument list") {
    spec.instruments = {};
    CHECK_THROWS_AS(build_regression_data(d, spec), InvalidParameterError);
  }
}

TEST_CASE("SWM CSV read, validation and write round trip") {
  SUBCASE("valid 3x3") {
    const TempFile f("w.csv", "0,1,0\n1,0,0.5\n0,0.5,0\n");
    const SpatialWeights w = read_swm_csv(f.path);
    CHECK(w.n() == 3);
    CHECK(w.weights(1, 2) == 0.5);
    CHECK(w.provenance.kind == ProvenanceKind::user_supplied);

    write_swm_csv(w, "mi2sl_test_roundtrip.csv");
    const SpatialWeights back = read_swm_csv("mi2sl_test_roundtrip.csv");
    CHECK((back.weights - w.weights).cwiseAbs().maxCoeff() == 0.0);
    std::remove("mi2sl_test_roundtrip.csv");
  }
  SUBCASE("asymmetric") {
    const TempFile f("asym.csv", "0,1\n0,0\n");
    CHECK_THROWS_AS(read_swm_csv(f.path), InvalidParameterError);
  }
  SUBCASE("nonzero diagonal") {
    const TempFile f("diag.csv", "1,1\n1,0\n");
    CHECK_THROWS_AS(read_swm_csv(f.path), InvalidParameterError);
  }
  SUBCASE("negative entry") {
    const TempFile f("neg.csv", "0,-1\n-1,0\n");
    CHECK_THROWS_AS(read_swm_csv(f.path), InvalidParameterError);
  }
  SUBCASE("non-square") {
    const TempFile f("rect.csv", "0,1,0\n1,0,1\n");
    CHECK_THROWS_AS(read_swm_csv(f.path), ParseError);
  }
}

TEST_CASE("coordinates CSV") {
  SUBCASE("valid") {
    const TempFile f("coords.csv", "id,lat,lon\na,10.5,-20\nb,-45,170.25\n");
    const auto coords = read_coords_csv(f.path);
    CHECK(coords.size() == 2);
    CHECK(coords[0].lat_deg == 10.5);
    CHECK(coords[0].lon_deg == -20.0);
    CHECK(coords[1].lat_deg == -45.0);
  }
  SUBCASE("wrong header") {
    const TempFile f("badhdr.csv", "lat,lon\n1,2\n");
    CHECK_THROWS_AS(read_coords_csv(f.path), ParseError);
  }
  SUBCASE("malformed row") {
    const TempFile f("badrow.csv", "id,lat,lon\na,1\n");
    CHECK_THROWS_AS(read_coords_csv(f.path), ParseError);
  }
}
