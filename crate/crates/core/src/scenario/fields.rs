use serde::{Deserialize, Serialize};

use crate::types::{GpId, Time, WatershedId};

/// Temporal resolution of precipitation and flood products.
pub const SLOT_S: Time = 900;

/// Slot index containing `t`; slot `y` covers `[y * slot_s, (y + 1) * slot_s)`.
pub fn slot_of(t: Time, slot_s: Time) -> usize {
    t.max(0).div_euclid(slot_s) as usize
}

/// Dense per-grid-point field over time slots (precipitation, mm per slot).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpField {
    pub n_gp: usize,
    pub n_slots: usize,
    pub slot_s: Time,
    pub values: Vec<f64>,
}

pub type PrecipField = GpField;

impl GpField {
    pub fn zeros(n_gp: usize, n_slots: usize, slot_s: Time) -> Self {
        GpField { n_gp, n_slots, slot_s, values: vec![0.0; n_gp * n_slots] }
    }

    #[inline]
    pub fn get(&self, gp: GpId, slot: usize) -> f64 {
        self.values[gp.index() * self.n_slots + slot]
    }

    #[inline]
    pub fn get_mut(&mut self, gp: GpId, slot: usize) -> &mut f64 {
        &mut self.values[gp.index() * self.n_slots + slot]
    }

    pub fn at_time(&self, gp: GpId, t: Time) -> f64 {
        self.get(gp, slot_of(t, self.slot_s).min(self.n_slots - 1))
    }

    pub fn series(&self, gp: GpId) -> &[f64] {
        let i = gp.index() * self.n_slots;
        &self.values[i..i + self.n_slots]
    }
}

/// Field constant within each watershed: flood magnitude or initial value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WatershedField<T> {
    pub ws_of_gp: Vec<u32>,
    pub n_ws: usize,
    pub n_slots: usize,
    pub slot_s: Time,
    pub values: Vec<T>,
}

/// Dimensionless Q/Q2 per watershed and slot.
pub type FloodField = WatershedField<f64>;
/// 8-bit observation value per watershed and slot.
pub type ValueFieldInit = WatershedField<u8>;

impl<T: Copy + Default> WatershedField<T> {
    pub fn filled(ws_of_gp: Vec<u32>, n_ws: usize, n_slots: usize, slot_s: Time) -> Self {
        WatershedField { ws_of_gp, n_ws, n_slots, slot_s, values: vec![T::default(); n_ws * n_slots] }
    }

    #[inline]
    pub fn get_ws(&self, ws: WatershedId, slot: usize) -> T {
        self.values[ws.index() * self.n_slots + slot]
    }

    #[inline]
    pub fn get_ws_mut(&mut self, ws: WatershedId, slot: usize) -> &mut T {
        &mut self.values[ws.index() * self.n_slots + slot]
    }

    #[inline]
    pub fn watershed_of(&self, gp: GpId) -> WatershedId {
        WatershedId(self.ws_of_gp[gp.index()])
    }

    #[inline]
    pub fn get(&self, gp: GpId, slot: usize) -> T {
        self.get_ws(self.watershed_of(gp), slot)
    }

    pub fn at_time(&self, gp: GpId, t: Time) -> T {
        self.get(gp, slot_of(t, self.slot_s).min(self.n_slots - 1))
    }

    pub fn map<U: Copy + Default>(&self, f: impl Fn(T) -> U) -> WatershedField<U> {
        WatershedField {
            ws_of_gp: self.ws_of_gp.clone(),
            n_ws: self.n_ws,
            n_slots: self.n_slots,
            slot_s: self.slot_s,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}
