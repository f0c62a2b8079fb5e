//! Northbound method names and their parameter documents.

use std::str::FromStr;

use ocs_model::{ConnInfo, NbiError, ObjectType, ResourceStatus};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use crate::events::EventType;

pub const ADD_SWITCH: &str = "AddSwitch";
pub const ADD_TERMINAL: &str = "AddTerminal";
pub const ADD_LINK: &str = "AddLink";
pub const CREATE_NETWORK: &str = "CreateNetwork";
pub const UPDATE_RESOURCE_STATUS: &str = "UpdateResourceStatus";
pub const CREATE_FIBER_PATH: &str = "CreateFiberPath";
pub const DELETE_FIBER_PATH: &str = "DeleteFiberPath";
pub const RESTORE_FIBER_PATH: &str = "RestoreFiberPath";
pub const UPDATE_PATH_AVAILABILITY: &str = "UpdatePathAvailability";
pub const ADD_EVENT: &str = "AddEvent";
pub const CREATE_ACTION: &str = "CreateAction";
pub const DELETE_ACTION: &str = "DeleteAction";
pub const CREATE_EVENT_HANDLER: &str = "CreateEventHandler";
pub const CREATE_ALARM_HANDLER: &str = "CreateAlarmHandler";

pub const METHODS: [&str; 14] = [
    ADD_SWITCH,
    ADD_TERMINAL,
    ADD_LINK,
    CREATE_NETWORK,
    UPDATE_RESOURCE_STATUS,
    CREATE_FIBER_PATH,
    DELETE_FIBER_PATH,
    RESTORE_FIBER_PATH,
    UPDATE_PATH_AVAILABILITY,
    ADD_EVENT,
    CREATE_ACTION,
    DELETE_ACTION,
    CREATE_EVENT_HANDLER,
    CREATE_ALARM_HANDLER,
];

/// Enumerations are accepted in any letter case.
fn lenient<'de, D, T>(d: D) -> Result<T, D::Error>
where
    D: Deserializer<'de>,
    T: FromStr<Err = NbiError>,
{
    let s = String::deserialize(d)?;
    s.parse().map_err(|e: NbiError| serde::de::Error::custom(e.message))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddSwitch {
    pub ocs_id: String,
    pub conn_info: ConnInfo,
    pub tx_ports: Vec<String>,
    pub rx_ports: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddTerminal {
    pub terminal_id: String,
    pub conn_info: ConnInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddLink {
    pub link_id: String,
    pub src: String,
    pub dst: String,
    pub src_port: String,
    pub dst_port: String,
}

/// `topology_file` is either a path readable by the controller, the
/// document text itself, or an inline JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateNetwork {
    pub topology_file: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateResourceStatus {
    pub object_id: String,
    #[serde(deserialize_with = "lenient")]
    pub object_type: ObjectType,
    #[serde(deserialize_with = "lenient")]
    pub status: ResourceStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathParams {
    pub svc_id: String,
    pub a: String,
    pub z: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pce_alg: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocs_list: Option<Vec<String>>,
}

impl PathParams {
    pub fn new(svc_id: impl Into<String>, a: impl Into<String>, z: impl Into<String>) -> Self {
        PathParams {
            svc_id: svc_id.into(),
            a: a.into(),
            z: z.into(),
            pce_alg: None,
            ocs_list: None,
        }
    }

    pub fn via<I, S>(mut self, hops: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.ocs_list = Some(hops.into_iter().map(Into::into).collect());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvcId {
    pub svc_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdatePathAvailability {
    pub svc_id: String,
    #[serde(deserialize_with = "lenient")]
    pub status: ResourceStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddEvent {
    pub event_id: String,
    #[serde(deserialize_with = "lenient")]
    pub event_type: EventType,
    pub ocs: String,
    pub port: String,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeleteAction {
    pub act_id: String,
    pub svc_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateEventHandler {
    pub event_id: String,
    pub act_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateAlarmHandler {
    pub svc_id: String,
    pub act_id: String,
}

impl From<&crate::events::ActionSpec> for PathParams {
    fn from(a: &crate::events::ActionSpec) -> Self {
        PathParams {
            svc_id: a.svc_id.clone(),
            a: a.a.clone(),
            z: a.z.clone(),
            pce_alg: a.pce_alg.clone(),
            ocs_list: a.ocs_list.clone(),
        }
    }
}
