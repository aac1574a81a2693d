//! Transmit chain, channel impairments and the receive front end.

mod chain;
mod constellation;
mod frame;
mod noise;
mod rummler;

pub use chain::{
    aggregate_response, channel_pass, hold_per_symbol, receive_front_end, transmit,
    upsample_filter, AggregateResponse, Precoder, Transmission, Waveform, AGGREGATE_TRIM,
};
pub use constellation::{max_data_rate, Constellation};
pub use frame::{FrameLayout, SymbolFrame, SymbolRole};
pub use noise::{complex_gaussian, gen_wiener_pn, pn_variance_from_dbc, wiener_pn_with, PnModel};
pub use rummler::{
    gen_rummler_channel, rummler_channel_at, ChannelRealization, NotchDepth, NotchPosition, RummlerStats,
    ECHO_DELAY_S,
};
