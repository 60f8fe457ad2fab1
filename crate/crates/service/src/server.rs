//! Binding and running the HTTP server.

use std::net::{SocketAddr, TcpListener};
use std::sync::Arc;
use std::thread::JoinHandle;

use memovis_core::adapters::ModelSuite;
use tokio::sync::oneshot;

use crate::app::{App, Service};
use crate::config::ServiceConfig;
use crate::error::ServiceError;
use crate::http::router;

fn runtime() -> Result<tokio::runtime::Runtime, ServiceError> {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .map_err(|e| ServiceError::Internal(format!("cannot start runtime: {e}")))
}

fn bind(addr: SocketAddr) -> Result<TcpListener, ServiceError> {
    let listener = TcpListener::bind(addr).map_err(|e| ServiceError::Internal(format!("cannot bind {addr}: {e}")))?;
    listener
        .set_nonblocking(true)
        .map_err(|e| ServiceError::Internal(e.to_string()))?;
    Ok(listener)
}

/// A server running on a background thread.
pub struct RunningServer {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
    app: Option<App>,
}

impl RunningServer {
    /// Starts `app` on `addr`; port 0 picks a free port.
    pub fn spawn(app: App, addr: SocketAddr) -> Result<Self, ServiceError> {
        let listener = bind(addr)?;
        let addr = listener.local_addr().map_err(|e| ServiceError::Internal(e.to_string()))?;
        let rt = runtime()?;
        let routes = router(app.service().clone());
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::Builder::new()
            .name("memovis-http".into())
            .spawn(move || {
                rt.block_on(async move {
                    let listener = match tokio::net::TcpListener::from_std(listener) {
                        Ok(l) => l,
                        Err(e) => return tracing::error!("listener: {e}"),
                    };
                    let shutdown = async {
                        let _ = rx.await;
                    };
                    if let Err(e) = axum::serve(listener, routes).with_graceful_shutdown(shutdown).await {
                        tracing::error!("server: {e}");
                    }
                })
            })
            .map_err(|e| ServiceError::Internal(format!("cannot spawn server thread: {e}")))?;
        Ok(Self {
            addr,
            stop: Some(tx),
            thread: Some(thread),
            app: Some(app),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn service(&self) -> &Arc<Service> {
        self.app.as_ref().expect("running").service()
    }

    /// Stops accepting requests, then stops the job workers.
    pub fn stop(mut self) {
        self.stop_inner();
    }

    fn stop_inner(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
        if let Some(mut app) = self.app.take() {
            app.shutdown();
        }
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        self.stop_inner();
    }
}

/// Runs the service in the foreground until interrupted.
pub fn serve(config: ServiceConfig, models: ModelSuite) -> Result<(), ServiceError> {
    let addr = SocketAddr::new(config.bind, config.port);
    let listener = bind(addr)?;
    let mut app = App::start(config, models)?;
    let routes = router(app.service().clone());
    tracing::info!(%addr, "listening");
    let rt = runtime()?;
    let served = rt.block_on(async move {
        let listener = tokio::net::TcpListener::from_std(listener)?;
        axum::serve(listener, routes)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
                tracing::info!("shutting down");
            })
            .await
    });
    app.shutdown();
    served.map_err(|e| ServiceError::Internal(format!("server: {e}")))
}
