//! JSON encodings: complex numbers are `[re, im]` pairs, vectors are lists of
//! pairs and matrices are lists of rows.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{CMatrix, CVector, C64};

pub fn pair(z: &C64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn vec_pairs(x: &CVector) -> Vec<[f64; 2]> {
    x.iter().map(pair).collect()
}

pub fn mat_rows(a: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| pair(&a[(i, j)])).collect())
        .collect()
}

pub fn rows_to_mat(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix, String> {
    let n = rows.len();
    if n == 0 {
        return Err("empty matrix".into());
    }
    let m = rows[0].len();
    if rows.iter().any(|r| r.len() != m) {
        return Err("ragged matrix rows".into());
    }
    Ok(CMatrix::from_fn(n, m, |i, j| {
        C64::new(rows[i][j][0], rows[i][j][1])
    }))
}

pub mod scalar {
    use super::*;
    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        pair(z).serialize(s)
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        let [a, b] = <[f64; 2]>::deserialize(d)?;
        Ok(C64::new(a, b))
    }
}

pub mod vector {
    use super::*;
    pub fn serialize<S: Serializer>(x: &CVector, s: S) -> Result<S::Ok, S::Error> {
        vec_pairs(x).serialize(s)
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CVector, D::Error> {
        let v = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(CVector::from_iterator(
            v.len(),
            v.into_iter().map(|[a, b]| C64::new(a, b)),
        ))
    }
}

pub mod matrix {
    use super::*;
    pub fn serialize<S: Serializer>(a: &CMatrix, s: S) -> Result<S::Ok, S::Error> {
        mat_rows(a).serialize(s)
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMatrix, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        rows_to_mat(&rows).map_err(D::Error::custom)
    }
}

pub mod opt_matrix {
    use super::*;
    pub fn serialize<S: Serializer>(a: &Option<CMatrix>, s: S) -> Result<S::Ok, S::Error> {
        a.as_ref().map(mat_rows).serialize(s)
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<CMatrix>, D::Error> {
        let rows = Option::<Vec<Vec<[f64; 2]>>>::deserialize(d)?;
        rows.map(|r| rows_to_mat(&r).map_err(D::Error::custom))
            .transpose()
    }
}
